"""Cycle-consistent adversarial training of the lesion-removal generator."""

from .image_pool import ImagePool
from .losses import (
    GeneratorLosses,
    combine_generator_losses,
    cycle_loss,
    identity_loss,
    lsgan_d_loss,
    lsgan_g_loss,
    total_generator_loss,
)
from .optimizer import Adam, AdamState, adam_step, lr_schedule
from .trainer import (
    TrainState,
    background_leak,
    create_train_state,
    load_train_state,
    losses_frame,
    random_crop,
    save_train_state,
    select_best_epoch,
    synthesize_healthy,
    train,
    train_step,
    write_loss_curves,
)

__all__ = [
    "Adam",
    "AdamState",
    "GeneratorLosses",
    "ImagePool",
    "TrainState",
    "adam_step",
    "background_leak",
    "combine_generator_losses",
    "create_train_state",
    "cycle_loss",
    "identity_loss",
    "load_train_state",
    "losses_frame",
    "lr_schedule",
    "lsgan_d_loss",
    "lsgan_g_loss",
    "random_crop",
    "save_train_state",
    "select_best_epoch",
    "synthesize_healthy",
    "total_generator_loss",
    "train",
    "train_step",
    "write_loss_curves",
]
