import pytest

from fluidq import validate_model

# two classes, three stations; the second differs only in one disabled pair
CASE_A = {
    "classes": 2,
    "stations": 3,
    "lambda": [8, 4],
    "nu": [1, 1, 1],
    "mu": [[3, 10, 1], [1, 4, 2]],
}
CASE_B = {
    "classes": 2,
    "stations": 3,
    "lambda": [8, 4],
    "nu": [1, 1, 1],
    "mu": [[3, 10, 1], [0, 4, 2]],
}
MINIMAL = {"classes": 1, "stations": 1, "lambda": [2], "nu": [1], "mu": [[2]]}

# service rates depend only on the class; critically loaded by construction
CLASS_DEPENDENT_2X2 = {
    "classes": 2,
    "stations": 2,
    "lambda": [4.5, 1],
    "nu": [1, 1],
    "mu": [[3, 3], [2, 2]],
}


@pytest.fixture
def case_a():
    return validate_model(CASE_A)


@pytest.fixture
def case_b():
    return validate_model(CASE_B)


@pytest.fixture
def minimal():
    return validate_model(MINIMAL)


@pytest.fixture
def class_dependent_2x2():
    return validate_model(CLASS_DEPENDENT_2X2)
