"""Alternating generator/discriminator training with per-epoch checkpoints."""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import plotly.graph_objects as go

from ..autodiff import Tape, Tensor
from ..imgvol import SliceImage
from ..nets import (
    Network,
    build_discriminator,
    init_generator,
    init_weights,
    load_arrays,
    load_network,
    parameters_of,
    save_arrays,
    save_network,
)
from ..shared.errors import EmptyPoolError, MalformedHeaderError, NonFiniteError, ShapeMismatchError
from ..shared.schemas import (
    CycleGanConfig,
    LossRecord,
    LossWeights,
    NetsConfig,
    TrainStateRecord,
)
from .image_pool import ImagePool
from .losses import lsgan_d_loss, total_generator_loss
from .optimizer import Adam, lr_schedule

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
PoolItem = Union[SliceImage, np.ndarray]

NETWORK_FILES = ("generator_xy", "generator_yx", "disc_x", "disc_y")
LOSS_COLUMNS = ("g_total", "g_adv_xy", "g_adv_yx", "cycle", "identity", "d_x", "d_y")


@dataclass
class TrainState:
    """Everything a training run needs to continue bit-exactly."""
    g_xy: Network
    g_yx: Network
    d_x: Network
    d_y: Network
    opt_g: Adam
    opt_dx: Adam
    opt_dy: Adam
    rng: np.random.Generator
    nets_cfg: NetsConfig
    cg_cfg: CycleGanConfig
    pool_x: ImagePool
    pool_y: ImagePool
    epoch: int = 0
    iteration: int = 0
    history: List[LossRecord] = field(default_factory=list)

    def networks(self) -> Dict[str, Network]:
        return dict(zip(NETWORK_FILES, (self.g_xy, self.g_yx, self.d_x, self.d_y)))

    def optimizers(self) -> Dict[str, Adam]:
        return {"optim_g": self.opt_g, "optim_dx": self.opt_dx, "optim_dy": self.opt_dy}


def create_train_state(nets_cfg: NetsConfig, cg_cfg: CycleGanConfig) -> TrainState:
    """Fresh networks initialized from seeds derived from the training seed."""
    train_cfg = cg_cfg.train
    children = np.random.SeedSequence(train_cfg.seed).spawn(5)
    seeds = [int(c.generate_state(1)[0]) for c in children]

    g_xy = init_generator(nets_cfg.generator, seeds[0], train_cfg.init_std)
    g_yx = init_generator(nets_cfg.generator, seeds[1], train_cfg.init_std)
    d_x = init_weights(build_discriminator(nets_cfg.discriminator), seeds[2], train_cfg.init_std)
    d_y = init_weights(build_discriminator(nets_cfg.discriminator), seeds[3], train_cfg.init_std)
    return TrainState(
        g_xy=g_xy,
        g_yx=g_yx,
        d_x=d_x,
        d_y=d_y,
        opt_g=Adam.from_config(parameters_of(g_xy, g_yx), train_cfg),
        opt_dx=Adam.from_config(d_x.parameters(), train_cfg),
        opt_dy=Adam.from_config(d_y.parameters(), train_cfg),
        rng=np.random.default_rng(children[4]),
        nets_cfg=nets_cfg,
        cg_cfg=cg_cfg,
        pool_x=ImagePool(train_cfg.fake_pool_size),
        pool_y=ImagePool(train_cfg.fake_pool_size),
    )


def _require_finite(value: float, name: str) -> float:
    if not math.isfinite(value):
        raise NonFiniteError(f"{name} loss became {value}")
    return value


def train_step(
    state: TrainState,
    x_batch: np.ndarray,
    y_batch: np.ndarray,
    weights: LossWeights,
    lr: float,
    epoch: Optional[int] = None,
) -> LossRecord:
    """One generator update (both G jointly) followed by one update of D_Y and of D_X.

    ``x_batch`` holds infected images and ``y_batch`` healthy ones, both
    N x 1 x S x S. Discriminators are frozen during the generator update and
    see the fakes of that same forward pass, detached.
    """
    x = Tensor(np.asarray(x_batch, dtype=np.float32))
    y = Tensor(np.asarray(y_batch, dtype=np.float32))

    state.d_x.set_requires_grad(False)
    state.d_y.set_requires_grad(False)
    with Tape() as tape:
        g = total_generator_loss(state.g_xy, state.g_yx, state.d_x, state.d_y, x, y, weights)
        g_total = _require_finite(g.total.item(), "generator")
        state.opt_g.zero_grad()
        tape.backward(g.total)
    state.opt_g.step(lr)
    state.opt_g.zero_grad()
    state.d_x.set_requires_grad(True)
    state.d_y.set_requires_grad(True)

    fake_y = Tensor(state.pool_y.query(g.fake_y.data, state.rng))
    fake_x = Tensor(state.pool_x.query(g.fake_x.data, state.rng))

    with Tape() as tape:
        d_y_loss = lsgan_d_loss(state.d_y, y, fake_y)
        d_y_value = _require_finite(d_y_loss.item(), "D_Y")
        state.opt_dy.zero_grad()
        tape.backward(d_y_loss)
    state.opt_dy.step(lr)
    state.opt_dy.zero_grad()

    with Tape() as tape:
        d_x_loss = lsgan_d_loss(state.d_x, x, fake_x)
        d_x_value = _require_finite(d_x_loss.item(), "D_X")
        state.opt_dx.zero_grad()
        tape.backward(d_x_loss)
    state.opt_dx.step(lr)
    state.opt_dx.zero_grad()

    state.iteration += 1
    return LossRecord(
        iteration=state.iteration,
        epoch=epoch if epoch is not None else state.epoch + 1,
        g_total=g_total,
        g_adv_xy=g.adv_xy.item(),
        g_adv_yx=g.adv_yx.item(),
        cycle=g.cycle.item(),
        identity=g.identity.item(),
        d_x=d_x_value,
        d_y=d_y_value,
        lr=lr,
    )


def _pool_array(pool: Sequence[PoolItem], name: str) -> List[np.ndarray]:
    if len(pool) == 0:
        raise EmptyPoolError(f"training pool {name} is empty")
    images = []
    for item in pool:
        arr = item.data if isinstance(item, SliceImage) else np.asarray(item, dtype=np.float32)
        if arr.ndim != 2:
            raise ShapeMismatchError(f"pool {name}: images must be 2-D, got shape {arr.shape}")
        images.append(arr.astype(np.float32, copy=False))
    return images


def random_crop(img: np.ndarray, side: int, rng: np.random.Generator) -> np.ndarray:
    """side x side crop at a random position; images already of that size pass through."""
    h, w = img.shape
    if h < side or w < side:
        raise ShapeMismatchError(f"image {h}x{w} is smaller than crop side {side}")
    if h == side and w == side:
        return img
    y0 = int(rng.integers(0, h - side + 1))
    x0 = int(rng.integers(0, w - side + 1))
    return img[y0:y0 + side, x0:x0 + side]


def _batch(
    images: List[np.ndarray], idx: np.ndarray, side: int, rng: np.random.Generator
) -> np.ndarray:
    return np.stack([random_crop(images[i], side, rng) for i in idx])[:, None]


def train(
    x_pool: Sequence[PoolItem],
    y_pool: Sequence[PoolItem],
    nets_cfg: NetsConfig,
    cg_cfg: CycleGanConfig,
    checkpoint_dir: PathLike,
    resume_from: Optional[PathLike] = None,
) -> TrainState:
    """Train on unpaired pools X (infected) and Y (healthy), checkpointing every epoch.

    Each epoch shuffles both pools and runs min(|X|, |Y|) // batch_size
    iterations. Training stops after ``stop_epoch`` when set, else after
    ``epochs``.
    """
    train_cfg = cg_cfg.train
    xs = _pool_array(x_pool, "X")
    ys = _pool_array(y_pool, "Y")
    n_iter = min(len(xs), len(ys)) // train_cfg.batch_size
    if n_iter == 0:
        raise EmptyPoolError(
            f"pools of {len(xs)} and {len(ys)} images cannot fill a batch of {train_cfg.batch_size}"
        )

    checkpoint_dir = Path(checkpoint_dir)
    if resume_from is not None:
        state = load_train_state(resume_from, nets_cfg, cg_cfg)
        last_ckpt: Optional[Path] = Path(resume_from)
        logger.info(f"Resuming from {resume_from} after epoch {state.epoch}")
    else:
        state = create_train_state(nets_cfg, cg_cfg)
        last_ckpt = None

    last_epoch = train_cfg.stop_epoch or train_cfg.epochs
    side = train_cfg.crop_side
    bs = train_cfg.batch_size
    for epoch in range(state.epoch + 1, last_epoch + 1):
        lr = lr_schedule(epoch, train_cfg)
        perm_x = state.rng.permutation(len(xs))
        perm_y = state.rng.permutation(len(ys))
        epoch_records = []
        try:
            for it in range(n_iter):
                x_batch = _batch(xs, perm_x[it * bs:(it + 1) * bs], side, state.rng)
                y_batch = _batch(ys, perm_y[it * bs:(it + 1) * bs], side, state.rng)
                record = train_step(state, x_batch, y_batch, cg_cfg.weights, lr, epoch=epoch)
                epoch_records.append(record)
                logger.debug(
                    f"epoch {epoch} iter {record.iteration}: G {record.g_total:.4f} "
                    f"D_X {record.d_x:.4f} D_Y {record.d_y:.4f}"
                )
        except NonFiniteError as e:
            raise NonFiniteError(
                f"epoch {epoch}: {e}", last_checkpoint=str(last_ckpt) if last_ckpt else None
            ) from e

        state.history.extend(epoch_records)
        state.epoch = epoch
        last_ckpt = save_train_state(state, checkpoint_dir / f"{epoch:03d}")
        write_loss_curves(state.history, checkpoint_dir)
        means = {c: float(np.mean([getattr(r, c) for r in epoch_records])) for c in LOSS_COLUMNS}
        logger.info(
            f"Epoch {epoch}/{train_cfg.epochs} lr={lr:.2e} "
            f"G={means['g_total']:.4f} cyc={means['cycle']:.4f} idt={means['identity']:.4f} "
            f"D_X={means['d_x']:.4f} D_Y={means['d_y']:.4f}"
        )
    return state


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def _optimizer_arrays(opt: Adam, names: List[str]) -> Dict[str, np.ndarray]:
    arrays = {}
    for name, m, v in zip(names, opt.state.m, opt.state.v):
        arrays[f"m.{name}"] = m
        arrays[f"v.{name}"] = v
    return arrays


def _optimizer_names(state: TrainState) -> Dict[str, List[str]]:
    return {
        "optim_g": [f"xy.{n}" for n, _ in state.g_xy.named_parameters()]
        + [f"yx.{n}" for n, _ in state.g_yx.named_parameters()],
        "optim_dx": [n for n, _ in state.d_x.named_parameters()],
        "optim_dy": [n for n, _ in state.d_y.named_parameters()],
    }


def save_train_state(state: TrainState, directory: PathLike) -> Path:
    """Write networks, optimizer moments, fake pools and the JSON state record."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for fname, net in state.networks().items():
        save_network(net, directory / fname)
    names = _optimizer_names(state)
    for fname, opt in state.optimizers().items():
        save_arrays(_optimizer_arrays(opt, names[fname]), directory / fname)
    pool_sizes = {}
    for fname, pool in (("pool_x", state.pool_x), ("pool_y", state.pool_y)):
        pool_sizes[fname] = len(pool.images)
        if pool.images:
            save_arrays({"images": pool.as_array()}, directory / fname)

    record = TrainStateRecord(
        epoch=state.epoch,
        iteration=state.iteration,
        adam_steps={fname: opt.state.t for fname, opt in state.optimizers().items()},
        rng_state=state.rng.bit_generator.state,
        pool_sizes=pool_sizes,
        history=state.history,
        nets=state.nets_cfg.model_dump(mode="json"),
        cyclegan=state.cg_cfg.model_dump(mode="json"),
    )
    with open(directory / "train_state.json", 'w', encoding='utf-8') as f:
        json.dump(record.model_dump(mode="json"), f, indent=2)
    logger.debug(f"Saved checkpoint {directory}")
    return directory


def load_train_state(directory: PathLike, nets_cfg: NetsConfig, cg_cfg: CycleGanConfig) -> TrainState:
    """Inverse of save_train_state; networks must match the given configs."""
    directory = Path(directory)
    try:
        with open(directory / "train_state.json", 'r', encoding='utf-8') as f:
            record = TrainStateRecord.model_validate(json.load(f))
    except FileNotFoundError as e:
        raise MalformedHeaderError(f"{directory} is not a training checkpoint") from e

    state = create_train_state(nets_cfg, cg_cfg)
    expected = {
        "generator_xy": nets_cfg.generator,
        "generator_yx": nets_cfg.generator,
        "disc_x": nets_cfg.discriminator,
        "disc_y": nets_cfg.discriminator,
    }
    loaded = {fname: load_network(directory / fname, expected[fname]) for fname in NETWORK_FILES}
    for fname, net in state.networks().items():
        net.load_state_dict(loaded[fname].state_dict())

    names = _optimizer_names(state)
    for fname, opt in state.optimizers().items():
        arrays, _ = load_arrays(directory / fname)
        opt.state.m = [arrays[f"m.{n}"] for n in names[fname]]
        opt.state.v = [arrays[f"v.{n}"] for n in names[fname]]
        opt.state.t = record.adam_steps[fname]

    for fname, pool in (("pool_x", state.pool_x), ("pool_y", state.pool_y)):
        if record.pool_sizes.get(fname, 0) > 0:
            arrays, _ = load_arrays(directory / fname)
            pool.load(arrays["images"])

    state.rng.bit_generator.state = record.rng_state
    state.epoch = record.epoch
    state.iteration = record.iteration
    state.history = list(record.history)
    return state


# ---------------------------------------------------------------------------
# Loss curves and epoch selection
# ---------------------------------------------------------------------------

def losses_frame(history: Sequence[LossRecord]) -> pd.DataFrame:
    columns = ["iteration", "epoch", *LOSS_COLUMNS, "lr"]
    return pd.DataFrame([r.model_dump() for r in history], columns=columns)


def write_loss_curves(history: Sequence[LossRecord], directory: PathLike) -> Tuple[Path, Path]:
    """losses.csv (one row per iteration) and losses.html (plotly line chart)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    df = losses_frame(history)
    csv_path = directory / "losses.csv"
    df.to_csv(csv_path, index=False)

    fig = go.Figure()
    for col in LOSS_COLUMNS:
        fig.add_trace(go.Scatter(x=df["iteration"], y=df[col], mode="lines", name=col))
    fig.update_layout(title="Training losses", xaxis_title="iteration", yaxis_title="loss")
    html_path = directory / "losses.html"
    fig.write_html(html_path, include_plotlyjs="cdn", div_id="loss-curves")
    return csv_path, html_path


def select_best_epoch(history: Sequence[LossRecord], criterion: str = "g_total") -> int:
    """Epoch with the smallest mean of one loss column; ties go to the earliest epoch."""
    if criterion not in LOSS_COLUMNS:
        raise ValueError(f"unknown loss column {criterion!r}; choose from {LOSS_COLUMNS}")
    if not history:
        raise ValueError("empty loss history")
    means = losses_frame(history).groupby("epoch")[criterion].mean()
    return int(means.idxmin())


# ---------------------------------------------------------------------------
# Inference
# ---------------------------------------------------------------------------

def synthesize_healthy(G_XY: Network, infected: SliceImage) -> SliceImage:
    """Translate one infected slice into a synthetic healthy one.

    The output claims no background: its lung field covers the whole image,
    since the generator is free to write outside the input's lung.
    """
    x = Tensor(infected.data[None, None])
    out = G_XY(x).data[0, 0]
    return SliceImage(
        data=np.clip(out, -1.0, 1.0),
        lung=np.ones_like(infected.lung),
        label="healthy",
        volume_id=infected.volume_id,
        slice_index=infected.slice_index,
        crop_origin=infected.crop_origin,
    )


def background_leak(synthetic: SliceImage, infected: SliceImage) -> float:
    """Mean |value| of the synthetic image outside the infected slice's lung."""
    outside = infected.lung == 0
    if not outside.any():
        return 0.0
    return float(np.abs(synthetic.data[outside]).mean())
