"""Central finite-difference gradient oracle shared by the test suite.

The numeric side only ever calls the forward pass, so it stays independent
of the reverse-mode code it checks.
"""

import numpy as np

from skimrnn.tensor import Tape, backward

FD_STEP = 1e-5
ATOL = 1e-7  # components this small are compared absolutely, not relatively


def numeric_grads(forward, arrays, h=FD_STEP):
    """Central differences of `forward()` w.r.t. each array, perturbed in place."""
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = forward()
            flat[i] = orig - h
            fm = forward()
            flat[i] = orig
            gflat[i] = (fp - fm) / (2.0 * h)
        grads.append(g)
    return grads


def analytic_grads(build_loss, tensors):
    """Backward-pass gradients of the scalar `build_loss()` w.r.t. each tensor."""
    for t in tensors:
        t.grad = None
    with Tape():
        loss = build_loss()
        backward(loss)
    return [t.grad.copy() if t.grad is not None else np.zeros_like(t.data)
            for t in tensors]


def max_rel_err(analytic, numeric, atol=ATOL):
    """Worst relative error over components big enough to compare relatively."""
    worst = 0.0
    for a, n in zip(analytic, numeric):
        diff = np.abs(a - n)
        scale = np.maximum(np.abs(a), np.abs(n))
        big = scale > atol
        if big.any():
            worst = max(worst, float((diff[big] / scale[big]).max()))
        small = ~big
        if small.any() and diff[small].max() > atol:
            worst = max(worst, 1.0)  # absolute disagreement on a tiny component
    return worst


def assert_grads_close(build_loss, tensors, rtol, h=FD_STEP):
    """Compare reverse-mode grads of build_loss() against central differences."""
    analytic = analytic_grads(build_loss, tensors)

    def forward():
        return build_loss().item()

    numeric = numeric_grads(forward, [t.data for t in tensors], h=h)
    err = max_rel_err(analytic, numeric)
    assert err <= rtol, f"gradient mismatch: max relative error {err:.3e} > {rtol:.0e}"
    return err
