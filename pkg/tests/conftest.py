"""Shared helpers: tracked-tensor construction and the finite-difference
gradient checker used across the op, architecture, and acceptance tests.
"""

import numpy as np

from infraclass.tensor import GradTape, Tensor, backward


def tracked(arr) -> Tensor:
    return Tensor(np.asarray(arr, dtype=np.float64), requires_grad=True)


def rel_err(a: float, b: float, floor: float = 1e-8) -> float:
    return abs(a - b) / max(abs(a), abs(b), floor)


def fd_gradcheck(build_loss, params, h=1e-5, tol=1e-4, max_checks=40,
                 seed=0) -> float:
    """Check recorded gradients of a scalar loss against central finite
    differences.

    ``build_loss(tape)`` must rebuild the loss from the params' current
    data; it is called once with a tape for the analytic gradients and
    twice per probed coordinate with ``tape=None`` for the differences.
    Large parameters are probed at ``max_checks`` sampled coordinates.
    Returns the worst relative error seen (asserted < tol).

    The error denominator is floored at the measurement limit of the
    differences themselves: a central difference of a loss of magnitude
    F carries ~eps*F/h of cancellation roundoff, so a gradient smaller
    than that noise divided by tol cannot be resolved to tol no matter
    how exact it is. Wrong gradients above the floor still fail.
    """
    tape = GradTape()
    loss = build_loss(tape)
    backward(loss, tape, params)
    f_scale = max(abs(float(loss.item())), 1.0)
    floor = np.finfo(np.float64).eps * f_scale / h / tol
    rng = np.random.default_rng(seed)
    worst = 0.0
    for p in params:
        assert p.grad is not None, "parameter missing a gradient"
        flat = p.data.reshape(-1)
        grad = p.grad.reshape(-1)
        if flat.size <= max_checks:
            coords = np.arange(flat.size)
        else:
            coords = rng.choice(flat.size, size=max_checks, replace=False)
        for i in coords:
            keep = flat[i]
            flat[i] = keep + h
            up = float(build_loss(None).item())
            flat[i] = keep - h
            down = float(build_loss(None).item())
            flat[i] = keep
            fd = (up - down) / (2.0 * h)
            worst = max(worst, rel_err(fd, float(grad[i]), floor))
    assert worst < tol, f"max relative gradient error {worst:.3e} >= {tol}"
    return worst
