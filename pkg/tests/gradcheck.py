import numpy as np

from ohlcnet.neuralnet import evaluate, mae_gradients

# exact-zero gradients (balanced L1 signs, dead units) meet ~1e-11 of
# finite-difference roundoff; the floor keeps those from reading as errors
DENOM_FLOOR = 1e-6


def max_rel_grad_error(model, x, y, h=1e-5):
    """Backprop vs central differences of the batch L1 loss over every parameter."""
    mae_gradients(model, x, y, train_mode=False)
    analytic = model._grad.copy()
    base = model.get_flat()
    numeric = np.empty_like(base)
    for k in range(base.size):
        pert = base.copy()
        pert[k] = base[k] + h
        model.set_flat(pert)
        plus = evaluate(model, x, y)
        pert[k] = base[k] - h
        model.set_flat(pert)
        numeric[k] = (plus - evaluate(model, x, y)) / (2 * h)
    model.set_flat(base)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), DENOM_FLOOR)
    return float(np.max(np.abs(analytic - numeric) / denom))
