import numpy as np
import pytest

from fruitgrade.learn.svm import Kernel, SvmModel, kkt_violation, solve_dual, svm_fit


def test_linear_1d():
    x = np.array([[-1.0], [-1.2], [1.0], [1.3]])
    y = np.array([0, 0, 1, 1])
    model = svm_fit(x, y, "linear")
    assert (model.predict(x) == y).all()
    pair = model.pairs[0]
    # boundary where the decision value crosses zero
    w = float(pair.dual_coef @ pair.support_vectors[:, 0])
    assert -1 < pair.rho / w < 1


def test_xor_gaussian():
    x = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    y = np.array([0, 0, 1, 1])
    model = svm_fit(x, y, "gaussian", gamma=1.0, C=10.0)
    assert (model.predict(x) == y).all()


@pytest.mark.parametrize("kernel,degree", [("linear", 3), ("poly", 2), ("poly", 3), ("gaussian", 3)])
def test_box_and_kkt(kernel, degree):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(90, 3))
    y = np.argmax(x @ rng.normal(size=(3, 3)) + 0.5 * rng.normal(size=(90, 3)), axis=1)
    model = svm_fit(x, y, kernel, degree, C=1.0)
    assert len(model.pairs) == 3
    for i, pair in enumerate(model.pairs):
        assert (np.abs(pair.dual_coef) <= model.C + 1e-12).all()
        # stopping tolerance 1e-3 on the dual gap bounds the margin violations
        assert kkt_violation(model, i, x, y) < 1e-2


def test_dual_equality_constraint():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(40, 2))
    yy = np.where(x[:, 0] + 0.2 * rng.normal(size=40) > 0, 1.0, -1.0)
    sol = solve_dual(Kernel("linear")(x, x), yy, 1.0)
    assert sol.converged
    assert abs(float(yy @ sol.alpha)) < 1e-10
    assert ((sol.alpha >= 0) & (sol.alpha <= 1.0)).all()


def test_gamma_default():
    model = svm_fit(np.random.default_rng(2).normal(size=(10, 4)), np.arange(10) % 2, "gaussian")
    assert model.kernel.gamma == pytest.approx(0.25)


def test_requires_two_classes_and_positive_c():
    with pytest.raises(ValueError):
        svm_fit(np.zeros((4, 1)), np.zeros(4, int))
    with pytest.raises(ValueError):
        svm_fit(np.arange(4.0)[:, None], [0, 0, 1, 1], C=0)


def test_round_trip():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(30, 2))
    y = rng.integers(0, 3, 30)
    model = svm_fit(x, y, "poly", 2)
    back = SvmModel.from_dict(model.to_dict())
    assert np.array_equal(back.votes(x), model.votes(x))
