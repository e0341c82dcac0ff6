import numpy as np
import pytest

from jmie import autodiff as ad


def finite_difference(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of the scalar function ``f`` wrt ``x``.

    ``f`` takes no arguments and must re-read ``x`` (mutated in place) on
    every call, i.e. rebuild its forward pass from the current buffer.
    """
    grad = np.zeros_like(x)
    flat = x.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def assert_close(actual: np.ndarray, expected: np.ndarray, rtol: float) -> None:
    """|a - b| <= rtol * max(1, |a|, |b|), elementwise."""
    actual = np.asarray(actual, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    denom = np.maximum(1.0, np.maximum(np.abs(actual), np.abs(expected)))
    err = np.abs(actual - expected) / denom
    assert err.max() <= rtol, f"max rel err {err.max():.3e} > {rtol:.1e}"


def check_gradients(build_loss, params: dict, h: float = 1e-5, rtol: float = 1e-6) -> None:
    """Compare tape gradients of ``build_loss()`` against finite differences.

    ``params`` maps names to leaf Tensors the loss depends on; ``build_loss``
    reconstructs the graph from their current data and returns the loss.
    """
    for p in params.values():
        p.grad = None
    with ad.Tape():
        loss = build_loss()
        ad.backward(loss)
    for name, p in params.items():
        fd = finite_difference(lambda: build_loss().item(), p.data, h=h)
        got = p.grad if p.grad is not None else np.zeros_like(p.data)
        try:
            assert_close(got, fd, rtol)
        except AssertionError as exc:
            raise AssertionError(f"gradient mismatch for {name!r}: {exc}") from exc


@pytest.fixture
def rng():
    return np.random.default_rng(0)
