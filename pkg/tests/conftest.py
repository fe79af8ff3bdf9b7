import numpy as np
import pytest

import perigeo as pg


def set_1d(points, period):
    motif = np.array([[p / period] for p in points], dtype=float)
    return pg.PeriodicSet(pg.UnitCell(np.array([[float(period)]])), motif)


@pytest.fixture(scope="session")
def s15():
    return set_1d([0, 1, 3, 4, 5, 7, 9, 10, 12], 15)


@pytest.fixture(scope="session")
def q15():
    return set_1d([0, 1, 3, 4, 6, 8, 9, 12, 14], 15)


@pytest.fixture(scope="session")
def s32():
    return set_1d([0, 7, 8, 9, 12, 15, 17, 18, 19, 20, 21, 22, 26, 27, 29, 30], 32)


@pytest.fixture(scope="session")
def q32():
    return set_1d([0, 1, 8, 9, 10, 12, 13, 15, 18, 19, 20, 21, 22, 23, 27, 30], 32)


@pytest.fixture(scope="session")
def s4():
    return set_1d([0, 1 / 4, 1 / 3, 1 / 2], 1)


@pytest.fixture(scope="session")
def s1():
    cell = pg.UnitCell(10 * np.eye(2))
    motif = np.array([[0.2, 0.2], [0.2, 0.8], [0.8, 0.2], [0.8, 0.8]])
    return pg.PeriodicSet(cell, motif)


@pytest.fixture(scope="session")
def s2():
    cell = pg.UnitCell(10 * np.eye(2))
    motif = np.array([[0.2, 0.2], [0.2, 0.8], [0.8, 0.2], [0.8, 0.8], [0.5, 0.5]])
    return pg.PeriodicSet(cell, motif)


@pytest.fixture(scope="session")
def square():
    return pg.PeriodicSet(pg.UnitCell(np.eye(2)), np.zeros((1, 2)))


@pytest.fixture(scope="session")
def hexagonal():
    basis = np.array([[1.0, 0.0], [0.5, np.sqrt(3) / 2]])
    return pg.PeriodicSet(pg.UnitCell(basis), np.zeros((1, 2)))


@pytest.fixture(scope="session")
def integer_lattice():
    return pg.PeriodicSet(pg.UnitCell(np.eye(1)), np.zeros((1, 1)))
