"""Composite losses and the alternating 1:1 adversarial training loop."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .aaim import aaim_forward
from .autodiff import AdamW, Tensor
from .metrics import mae as mae_metric
from .metrics import rmse as rmse_metric

log = logging.getLogger(__name__)

# sigmoid outputs are clamped before the logarithm; the discriminator's
# scaled-sigmoid scores preclude a fused logit-space formulation
EPS_CLAMP = 1e-7


@dataclass
class LossConfig:
    lam: float = 0.2
    batch_size: int = 256
    max_epochs: int = 150
    patience: int = 15
    lr: float = 1e-3
    weight_decay: float = 1e-2
    eval_batch_size: int = 8192

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")
        if self.patience > self.max_epochs:
            raise ValueError("patience cannot exceed max_epochs")


@dataclass
class TrainState:
    epoch: int = 0
    best_val_mae: float = float("inf")
    best_epoch: int = -1
    epochs_since_improvement: int = 0
    best_state: dict | None = None
    log_rows: list = field(default_factory=list)


# ----------------------------------------------------------------------
# pointwise losses
# ----------------------------------------------------------------------
def bce(x, y):
    """Binary cross-entropy of a raw score against a 0/1 target."""
    s = 1.0 / (1.0 + np.exp(-float(x)))
    s = np.clip(s, EPS_CLAMP, 1.0 - EPS_CLAMP)
    return float(-(y * np.log(s) + (1.0 - y) * np.log(1.0 - s)))


def mse(x, y):
    return float((x - y) ** 2)


def _bce_mean(scores, label):
    """Mean BCE of a tensor of raw scores against a constant 0/1 label."""
    s = scores.sigmoid().clip(EPS_CLAMP, 1.0 - EPS_CLAMP)
    if label == 1:
        return -(s.log().mean())
    return -((1.0 - s).log().mean())


def generator_loss(outputs, targets, lam):
    """(1 - lambda) * adversarial BCE + lambda * regression MSE.

    Returns (total, adversarial_term, regression_term)."""
    adv = _bce_mean(outputs.d_real, 1)
    diff = outputs.y_real - Tensor(np.asarray(targets).reshape(-1, 1))
    reg = (diff * diff).mean()
    total = adv * (1.0 - lam) + reg * lam
    return total, adv, reg


def discriminator_loss(outputs):
    """Mean of BCE(real scores, 1) + BCE(fake scores, 0)."""
    return _bce_mean(outputs.d_real, 1) + _bce_mean(outputs.d_fake, 0)


# ----------------------------------------------------------------------
# optimization loop
# ----------------------------------------------------------------------
def _check_finite(value, term):
    if not np.isfinite(value):
        raise FloatingPointError(f"non-finite {term} loss ({value})")


def train_epoch(model, ds, split, cfg, opt_g, opt_d, rng, state):
    """One pass over the training triplets.

    Per mini-batch: a forward pass and discriminator step with the
    generator fixed, then a fresh forward pass and generator step with the
    discriminator frozen. The last partial batch is kept.
    """
    train_idx = split.train[rng.permutation(len(split.train))]
    users = ds.users[train_idx]
    services = ds.services[train_idx]
    targets = ds.values[train_idx]

    sums = {"L_G": 0.0, "L_reg": 0.0, "L_adv_G": 0.0, "L_D": 0.0}
    n_batches = 0
    for lo in range(0, len(train_idx), cfg.batch_size):
        hi = min(lo + cfg.batch_size, len(train_idx))
        bu, bs, by = users[lo:hi], services[lo:hi], targets[lo:hi]

        # discriminator phase (generator/DELM parameters frozen)
        outputs = aaim_forward(
            model.generator, model.discriminator, bu, bs, model.bank,
            model.tau, rng, training=True,
        )
        loss_d = discriminator_loss(outputs)
        _check_finite(loss_d.item(), "discriminator")
        loss_d.backward()
        opt_d.step()
        model.zero_grads()

        # generator phase (discriminator frozen)
        outputs = aaim_forward(
            model.generator, model.discriminator, bu, bs, model.bank,
            model.tau, rng, training=True,
        )
        loss_g, adv, reg = generator_loss(outputs, by, cfg.lam)
        _check_finite(loss_g.item(), "generator")
        loss_g.backward()
        opt_g.step()
        model.zero_grads()

        sums["L_G"] += loss_g.item()
        sums["L_reg"] += reg.item()
        sums["L_adv_G"] += adv.item()
        sums["L_D"] += loss_d.item()
        n_batches += 1

    state.epoch += 1
    return {k: v / n_batches for k, v in sums.items()}


def validate(model, ds, split, eval_batch_size=8192):
    """Validation MAE/RMSE on the denormalized (reporting) scale."""
    users = ds.users[split.val]
    services = ds.services[split.val]
    truth = ds.values[split.val] * ds.global_max
    pred = np.clip(
        model.predict(users, services, batch_size=eval_batch_size), 0.0, 1.0
    ) * ds.global_max
    return mae_metric(pred, truth), rmse_metric(pred, truth)


def fit(model, ds, split, cfg, seed):
    """Alternating optimization with early stopping on validation MAE.

    Returns the train state with the best-validation parameters restored
    into the model.
    """
    if not ds.normalized:
        raise ValueError("fit expects a normalized dataset")
    rng = np.random.default_rng(seed)
    opt_g = AdamW(model.generator_parameters(), lr=cfg.lr,
                  weight_decay=cfg.weight_decay)
    opt_d = AdamW(model.discriminator_parameters(), lr=cfg.lr,
                  weight_decay=cfg.weight_decay)
    state = TrainState()

    for _ in range(cfg.max_epochs):
        losses = train_epoch(model, ds, split, cfg, opt_g, opt_d, rng, state)
        val_mae, val_rmse = validate(model, ds, split, cfg.eval_batch_size)
        state.log_rows.append({
            "epoch": state.epoch, **losses,
            "val_mae": val_mae, "val_rmse": val_rmse,
        })
        if val_mae < state.best_val_mae:
            state.best_val_mae = val_mae
            state.best_epoch = state.epoch
            state.best_state = model.state_dict()
            state.epochs_since_improvement = 0
        else:
            state.epochs_since_improvement += 1
            if state.epochs_since_improvement >= cfg.patience:
                break
        log.debug("epoch %d: %s val_mae=%.6f", state.epoch, losses, val_mae)

    if state.best_state is not None:
        model.load_state_dict(state.best_state)
    return state


def write_loss_log(state, path):
    """CSV loss log: epoch, L_G, L_reg, L_adv_G, L_D, val_MAE, val_RMSE."""
    with open(path, "w") as f:
        f.write("epoch,L_G,L_reg,L_adv_G,L_D,val_mae,val_rmse\n")
        for row in state.log_rows:
            f.write(
                f"{row['epoch']},{row['L_G']:.10g},{row['L_reg']:.10g},"
                f"{row['L_adv_G']:.10g},{row['L_D']:.10g},"
                f"{row['val_mae']:.10g},{row['val_rmse']:.10g}\n"
            )
