"""A compact invariant/equivariant GNN trained on frame-averaged views.

The backbone never sees raw coordinates: every input is first projected to
one or more canonical views (see :mod:`faframe.frames`), the network runs
on each view's radius graph, and outputs are mapped back and averaged.
Energies are per-system scalars; forces, when enabled, come from a direct
per-atom head evaluated in canonical axes.

Frames are computed outside the autodiff graph and treated as constants;
gradients flow through the network weights only.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import diffmath as dm
from .diffmath import DiffValue
from .elements import MAX_ATOMIC_NUMBER
from .errors import NonFiniteLoss, NoForcesRequested, UnknownElement
from .frames import canonicalize, compute_frame
from .geometry import (
    E3,
    AtomicSystem,
    RadiusGraph,
    apply_transform,
    build_radius_graph,
    normalize_group,
    random_transform,
)

FA_MODES = ("full", "stochastic", "none", "data_augment")

MP_VARIANTS = ("standard", "simple", "basic")
ENERGY_HEADS = ("weighted", "simple")

# Width of the projected per-element property block prepended to the
# learned embedding when a property table is configured.
PROPERTY_CHANNELS = 32
PROPERTY_COLUMNS = 10


@dataclass(frozen=True)
class FAENetConfig:
    """Architecture and graph hyperparameters.

    The defaults are the reference operating point: 384 hidden channels,
    480 filters, 104 gaussians, 5 interactions, 6 angstrom cutoff, and at
    most 40 neighbors per atom.
    """

    hidden_channels: int = 384
    num_filters: int = 480
    num_gaussians: int = 104
    num_interactions: int = 5
    cutoff: float = 6.0
    max_neighbors: int = 40
    mp_variant: str = "standard"
    energy_head: str = "weighted"
    jumping_connections: bool = True
    predict_forces: bool = False
    force_head_hidden: int = 256
    property_table: np.ndarray | None = None

    def __post_init__(self):
        for name in ("hidden_channels", "num_filters", "num_gaussians",
                     "num_interactions", "max_neighbors", "force_head_hidden"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.cutoff <= 0:
            raise ValueError(f"cutoff must be positive, got {self.cutoff}")
        if self.mp_variant not in MP_VARIANTS:
            raise ValueError(f"mp_variant must be one of {MP_VARIANTS}, got {self.mp_variant!r}")
        if self.energy_head not in ENERGY_HEADS:
            raise ValueError(f"energy_head must be one of {ENERGY_HEADS}, got {self.energy_head!r}")
        table = self.property_table
        if table is not None:
            table = np.asarray(table, dtype=np.float64)
            if table.shape != (MAX_ATOMIC_NUMBER, PROPERTY_COLUMNS):
                raise ValueError(
                    f"property_table must be ({MAX_ATOMIC_NUMBER}, {PROPERTY_COLUMNS}), "
                    f"got {table.shape}"
                )
            if self.hidden_channels <= PROPERTY_CHANNELS:
                raise ValueError(
                    f"hidden_channels must exceed {PROPERTY_CHANNELS} when a property "
                    f"table is configured"
                )
            object.__setattr__(self, "property_table", table)

    def to_dict(self) -> dict:
        table = self.property_table
        return {
            "hidden_channels": self.hidden_channels,
            "num_filters": self.num_filters,
            "num_gaussians": self.num_gaussians,
            "num_interactions": self.num_interactions,
            "cutoff": self.cutoff,
            "max_neighbors": self.max_neighbors,
            "mp_variant": self.mp_variant,
            "energy_head": self.energy_head,
            "jumping_connections": self.jumping_connections,
            "predict_forces": self.predict_forces,
            "force_head_hidden": self.force_head_hidden,
            "property_table": None if table is None else table.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FAENetConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def config_hash(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()


class Prediction(NamedTuple):
    energy: float
    forces: np.ndarray | None


def rbf(distances: np.ndarray, num_gaussians: int, cutoff: float) -> np.ndarray:
    """Gaussian radial basis: centers uniform on [0, cutoff], width = spacing."""
    distances = np.asarray(distances, dtype=np.float64)
    centers = np.linspace(0.0, cutoff, num_gaussians)
    sigma = cutoff / (num_gaussians - 1) if num_gaussians > 1 else cutoff
    diff = distances[..., None] - centers
    return np.exp(-(diff * diff) / (2.0 * sigma * sigma))


def _init_params(config: FAENetConfig, rng: np.random.Generator) -> dict[str, DiffValue]:
    h = config.hidden_channels
    f = config.num_filters
    g = config.num_gaussians
    params: dict[str, np.ndarray] = {}

    emb_dim = h - PROPERTY_CHANNELS if config.property_table is not None else h
    params["atom_embedding"] = dm.glorot_uniform(rng, MAX_ATOMIC_NUMBER, emb_dim)
    if config.property_table is not None:
        params["property_projection"] = dm.glorot_uniform(rng, PROPERTY_COLUMNS, PROPERTY_CHANNELS)

    edge_in = 3 + g
    params["edge_mlp.w1"] = dm.glorot_uniform(rng, edge_in, f)
    params["edge_mlp.b1"] = np.zeros(f)
    params["edge_mlp.w2"] = dm.glorot_uniform(rng, f, f)
    params["edge_mlp.b2"] = np.zeros(f)

    for layer in range(config.num_interactions):
        prefix = f"interaction.{layer}"
        if config.mp_variant == "standard":
            params[f"{prefix}.filter_w"] = dm.glorot_uniform(rng, f + 2 * h, f)
            params[f"{prefix}.filter_b"] = np.zeros(f)
        elif config.mp_variant == "simple":
            params[f"{prefix}.filter_w"] = dm.glorot_uniform(rng, f, f)
            params[f"{prefix}.filter_b"] = np.zeros(f)
        params[f"{prefix}.node_w"] = dm.glorot_uniform(rng, h, f)
        params[f"{prefix}.update_w"] = dm.glorot_uniform(rng, f, h)
        params[f"{prefix}.update_b"] = np.zeros(h)

    half = max(h // 2, 1)
    if config.energy_head == "weighted":
        params["energy_head.alpha.w1"] = dm.glorot_uniform(rng, h, half)
        params["energy_head.alpha.b1"] = np.zeros(half)
        params["energy_head.alpha.w2"] = dm.glorot_uniform(rng, half, 1)
        params["energy_head.alpha.b2"] = np.zeros(1)
    params["energy_head.value.w1"] = dm.glorot_uniform(rng, h, half)
    params["energy_head.value.b1"] = np.zeros(half)
    params["energy_head.value.w2"] = dm.glorot_uniform(rng, half, 1)
    params["energy_head.value.b2"] = np.zeros(1)

    if config.predict_forces:
        fh = config.force_head_hidden
        params["force_head.w1"] = dm.glorot_uniform(rng, h, fh)
        params["force_head.b1"] = np.zeros(fh)
        params["force_head.w2"] = dm.glorot_uniform(rng, fh, 3)
        params["force_head.b2"] = np.zeros(3)

    return {name: DiffValue(data, name=name) for name, data in params.items()}


class FAENetModel:
    """Parameter container; all computation lives in the module functions."""

    def __init__(self, config: FAENetConfig, rng: np.random.Generator | None = None):
        self.config = config
        if rng is None:
            rng = np.random.default_rng()
        self.params = _init_params(config, rng)

    def parameters(self) -> list[DiffValue]:
        return list(self.params.values())

    def param_count(self) -> int:
        return int(sum(p.data.size for p in self.params.values()))

    def save(self, path):
        dm.save_checkpoint(self.params, path)

    def load(self, path):
        loaded = dm.load_checkpoint(path)
        if set(loaded) != set(self.params):
            missing = sorted(set(self.params) - set(loaded))
            extra = sorted(set(loaded) - set(self.params))
            raise ValueError(f"checkpoint mismatch; missing {missing}, unexpected {extra}")
        for name, data in loaded.items():
            if data.shape != self.params[name].data.shape:
                raise ValueError(
                    f"checkpoint entry {name} has shape {data.shape}, "
                    f"expected {self.params[name].data.shape}"
                )
            self.params[name].data = data


class _Batch(NamedTuple):
    z_index: np.ndarray
    prop_rows: np.ndarray | None
    edge_features: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    atom_output: np.ndarray
    num_outputs: int
    num_atoms: int


def _validate_numbers(numbers: np.ndarray):
    bad = numbers[(numbers < 1) | (numbers > MAX_ATOMIC_NUMBER)]
    if bad.size:
        raise UnknownElement(f"atomic number {int(bad[0])} outside 1..{MAX_ATOMIC_NUMBER}")


def _edge_feature_block(config: FAENetConfig, graph: RadiusGraph) -> np.ndarray:
    radial = rbf(graph.distances, config.num_gaussians, config.cutoff)
    return np.concatenate([graph.rel_vectors, radial], axis=1)


def _make_batch(views: list[AtomicSystem], config: FAENetConfig,
                output_ids: np.ndarray | None = None) -> _Batch:
    """Merge per-view radius graphs into one disjoint graph."""
    if output_ids is None:
        output_ids = np.arange(len(views))
    z_parts, edge_parts, src_parts, dst_parts, out_parts = [], [], [], [], []
    offset = 0
    for view, out_id in zip(views, output_ids):
        _validate_numbers(view.atomic_numbers)
        graph = build_radius_graph(view, config.cutoff, config.max_neighbors)
        z_parts.append(view.atomic_numbers - 1)
        edge_parts.append(_edge_feature_block(config, graph))
        src_parts.append(graph.src + offset)
        dst_parts.append(graph.dst + offset)
        out_parts.append(np.full(view.num_atoms, out_id, dtype=np.int64))
        offset += view.num_atoms
    z_index = np.concatenate(z_parts)
    prop_rows = None
    if config.property_table is not None:
        prop_rows = config.property_table[z_index]
    return _Batch(
        z_index=z_index,
        prop_rows=prop_rows,
        edge_features=np.concatenate(edge_parts),
        src=np.concatenate(src_parts),
        dst=np.concatenate(dst_parts),
        atom_output=np.concatenate(out_parts),
        num_outputs=int(np.max(output_ids)) + 1,
        num_atoms=offset,
    )


def _two_layer(params, prefix, x: DiffValue) -> DiffValue:
    hidden = dm.swish(dm.add(dm.matmul(x, params[f"{prefix}.w1"]), params[f"{prefix}.b1"]))
    return dm.add(dm.matmul(hidden, params[f"{prefix}.w2"]), params[f"{prefix}.b2"])


def _embed_arrays(model: FAENetModel, batch: _Batch) -> tuple[DiffValue, DiffValue]:
    params = model.params
    h0 = dm.gather_rows(params["atom_embedding"], batch.z_index)
    if batch.prop_rows is not None:
        projected = dm.matmul(dm.constant(batch.prop_rows), params["property_projection"])
        h0 = dm.concat([h0, projected], axis=1)
    edges = dm.constant(batch.edge_features)
    first = dm.swish(dm.add(dm.matmul(edges, params["edge_mlp.w1"]), params["edge_mlp.b1"]))
    e = dm.add(dm.matmul(first, params["edge_mlp.w2"]), params["edge_mlp.b2"])
    return h0, e


def _interaction_arrays(model: FAENetModel, layer: int, h: DiffValue, e: DiffValue,
                        src: np.ndarray, dst: np.ndarray, num_nodes: int) -> DiffValue:
    params = model.params
    variant = model.config.mp_variant
    prefix = f"interaction.{layer}"
    if variant == "standard":
        gate_in = dm.concat([e, dm.gather_rows(h, dst), dm.gather_rows(h, src)], axis=1)
        gate = dm.swish(dm.add(dm.matmul(gate_in, params[f"{prefix}.filter_w"]),
                               params[f"{prefix}.filter_b"]))
    elif variant == "simple":
        gate = dm.swish(dm.add(dm.matmul(e, params[f"{prefix}.filter_w"]),
                               params[f"{prefix}.filter_b"]))
    else:
        gate = e
    transformed = dm.matmul(h, params[f"{prefix}.node_w"])
    messages = dm.mul(gate, dm.gather_rows(transformed, src))
    aggregated = dm.segment_sum(messages, dst, num_nodes)
    update = dm.swish(dm.add(dm.matmul(aggregated, params[f"{prefix}.update_w"]),
                             params[f"{prefix}.update_b"]))
    return dm.add(h, update)


def embed(model: FAENetModel, view: AtomicSystem,
          graph: RadiusGraph) -> tuple[DiffValue, DiffValue]:
    """Initial node embeddings and edge embeddings for one view's graph."""
    _validate_numbers(view.atomic_numbers)
    z_index = view.atomic_numbers - 1
    prop_rows = None
    if model.config.property_table is not None:
        prop_rows = model.config.property_table[z_index]
    batch = _Batch(
        z_index=z_index,
        prop_rows=prop_rows,
        edge_features=_edge_feature_block(model.config, graph),
        src=graph.src,
        dst=graph.dst,
        atom_output=np.zeros(view.num_atoms, dtype=np.int64),
        num_outputs=1,
        num_atoms=view.num_atoms,
    )
    return _embed_arrays(model, batch)


def interaction(model: FAENetModel, h: DiffValue, e: DiffValue, graph: RadiusGraph,
                layer: int) -> DiffValue:
    """One residual message-passing block on a single view's graph."""
    return _interaction_arrays(model, layer, h, e, graph.src, graph.dst, graph.num_nodes)


def _net(model: FAENetModel, batch: _Batch,
         want_forces: bool) -> tuple[DiffValue, DiffValue | None]:
    """Run the backbone on a merged graph; returns (energy (B,1), forces (N,3))."""
    config = model.config
    params = model.params
    h, e = _embed_arrays(model, batch)
    layer_sum = None
    for layer in range(config.num_interactions):
        h = _interaction_arrays(model, layer, h, e, batch.src, batch.dst, batch.num_atoms)
        layer_sum = h if layer_sum is None else dm.add(layer_sum, h)
    h_out = layer_sum if config.jumping_connections else h

    value = _two_layer(params, "energy_head.value", h_out)
    if config.energy_head == "weighted":
        alpha = dm.sigmoid(_two_layer(params, "energy_head.alpha", h_out))
        per_atom = dm.mul(alpha, value)
    else:
        per_atom = value
    energy = dm.segment_sum(per_atom, batch.atom_output, batch.num_outputs)

    forces = None
    if want_forces:
        if not config.predict_forces:
            raise NoForcesRequested("this model has no force head")
        forces = _two_layer(params, "force_head", h_out)
    return energy, forces


def _prepare_views(model: FAENetModel, system: AtomicSystem, fa_mode: str, group: str,
                   rng: np.random.Generator | None):
    """Canonical (or augmented) views plus the matrix mapping canonical
    forces back to the input pose (None means identity)."""
    group = normalize_group(group)
    if fa_mode not in FA_MODES:
        raise ValueError(f"fa_mode must be one of {FA_MODES}, got {fa_mode!r}")
    if fa_mode == "none":
        return [system], [None], False
    if fa_mode == "data_augment":
        if rng is None:
            raise ValueError("data_augment mode needs an rng")
        transform = random_transform(group, rng)
        # Predictions are mapped back to the input pose: forces from the
        # augmented view are right-multiplied by U (the inverse rotation).
        return [apply_transform(system, transform)], [transform.rotation], False
    frame = compute_frame(system, group)
    if fa_mode == "stochastic":
        if rng is None:
            raise ValueError("stochastic mode needs an rng")
        elements = [frame.elements[int(rng.integers(len(frame.elements)))]]
    else:
        elements = list(frame.elements)
    views = [canonicalize(system, element).system for element in elements]
    # uncanonicalization right-multiplies by U^T
    back = [element.rotation.T for element in elements]
    return views, back, frame.degenerate


def forward(model: FAENetModel, system: AtomicSystem, fa_mode: str = "full",
            group: str = E3, rng: np.random.Generator | None = None) -> Prediction:
    """Predict energy (and forces if configured) for one system."""
    views, back_rotations, _ = _prepare_views(model, system, fa_mode, group, rng)
    batch = _make_batch(views, model.config)
    energy, forces = _net(model, batch, want_forces=model.config.predict_forces)
    energy_value = float(np.mean(energy.data))
    force_value = None
    if forces is not None:
        n = system.num_atoms
        stacked = forces.data.reshape(len(views), n, 3)
        mapped = [
            block if rotation is None else block @ rotation
            for block, rotation in zip(stacked, back_rotations)
        ]
        force_value = np.mean(mapped, axis=0)
    return Prediction(energy=energy_value, forces=force_value)


class TrainSample(NamedTuple):
    system: AtomicSystem
    energy: float
    forces: np.ndarray | None = None


def training_forward(model: FAENetModel, systems: list[AtomicSystem], fa_mode: str,
                     group: str, rng: np.random.Generator | None,
                     want_forces: bool) -> tuple[DiffValue, DiffValue | None]:
    """Differentiable batched forward.

    Returns per-sample energies (B, 1) and, when requested, per-atom forces
    (sum of sample sizes, 3) mapped back to each sample's input pose. Every
    sample's views are averaged inside the graph so gradients follow the
    same path the predictions took.
    """
    all_views: list[AtomicSystem] = []
    view_sample: list[int] = []
    view_weight: list[float] = []
    view_back: list[np.ndarray | None] = []
    for index, system in enumerate(systems):
        views, back, _ = _prepare_views(model, system, fa_mode, group, rng)
        weight = 1.0 / len(views)
        for view, rotation in zip(views, back):
            all_views.append(view)
            view_sample.append(index)
            view_weight.append(weight)
            view_back.append(rotation)

    batch = _make_batch(all_views, model.config, output_ids=np.arange(len(all_views)))
    energy_views, force_views = _net(model, batch, want_forces=want_forces)

    weights = np.array(view_weight)[:, None]
    weighted = dm.mul(energy_views, dm.constant(weights))
    energy = dm.segment_sum(weighted, np.array(view_sample), len(systems))

    forces = None
    if force_views is not None:
        sizes = [view.num_atoms for view in all_views]
        row_starts = np.concatenate(([0], np.cumsum(sizes)))
        pieces = []
        atom_targets = []
        target_starts = np.concatenate(
            ([0], np.cumsum([system.num_atoms for system in systems]))
        )
        for v, (sample, rotation, weight) in enumerate(
            zip(view_sample, view_back, view_weight)
        ):
            rows = np.arange(row_starts[v], row_starts[v + 1])
            block = dm.gather_rows(force_views, rows)
            if rotation is not None:
                block = dm.matmul(block, dm.constant(rotation))
            block = dm.mul(block, dm.constant(np.asarray(weight)))
            pieces.append(block)
            atom_targets.append(np.arange(target_starts[sample], target_starts[sample + 1]))
        forces = dm.segment_sum(
            dm.concat(pieces, axis=0),
            np.concatenate(atom_targets),
            int(target_starts[-1]),
        )
    return energy, forces


def train_step(model: FAENetModel, batch: list, optimizer: dm.AdamW, *,
               energy_coeff: float = 1.0, force_coeff: float = 0.0,
               fa_mode: str = "stochastic", group: str = E3,
               rng: np.random.Generator | None = None) -> float:
    """One optimization step on a batch of (system, energy, forces) samples.

    The loss is ``energy_coeff * MSE(energy) + force_coeff * MSE(forces)``.
    A non-finite loss raises NonFiniteLoss before any parameter is touched.
    """
    samples = [s if isinstance(s, TrainSample) else TrainSample(*s) for s in batch]
    if not samples:
        raise ValueError("train_step needs at least one sample")
    want_forces = force_coeff != 0.0
    if want_forces and not model.config.predict_forces:
        raise NoForcesRequested("force_coeff is nonzero but the model has no force head")
    if want_forces:
        missing = [i for i, s in enumerate(samples) if s.forces is None]
        if missing:
            raise ValueError(f"force_coeff is nonzero but samples {missing} have no force targets")

    systems = [s.system for s in samples]
    energy, forces = training_forward(model, systems, fa_mode, group, rng, want_forces)

    energy_targets = dm.constant(np.array([[s.energy] for s in samples]))
    loss = dm.mul(dm.mse_loss(energy, energy_targets), dm.constant(np.asarray(energy_coeff)))
    if want_forces:
        force_targets = dm.constant(np.concatenate([s.forces for s in samples], axis=0))
        force_loss = dm.mul(dm.mse_loss(forces, force_targets),
                            dm.constant(np.asarray(force_coeff)))
        loss = dm.add(loss, force_loss)

    loss_value = float(loss.data)
    if not np.isfinite(loss_value):
        raise NonFiniteLoss(f"loss evaluated to {loss_value}")
    optimizer.zero_grad()
    dm.backward(loss)
    optimizer.step()
    return loss_value


GRADCHECK_TOLERANCE = 1e-4

# Small shapes keep the finite-difference sweep fast while still exercising
# accumulation paths (repeated gather indices, shared segments).
GRADCHECK_CONFIG = FAENetConfig(
    hidden_channels=8,
    num_filters=8,
    num_gaussians=4,
    num_interactions=2,
    cutoff=4.0,
    max_neighbors=8,
    predict_forces=True,
    force_head_hidden=8,
)


def _gradcheck_cases(rng: np.random.Generator):
    """Named (inputs, scalar-loss builder) pairs, one per composite op."""

    def quadratic(y):
        return dm.mean(dm.mul(y, y))

    cases = {}
    a, b = rng.standard_normal((4, 3)), rng.standard_normal((3, 5))
    cases["matmul"] = ([a, b], lambda v: quadratic(dm.matmul(v[0], v[1])))

    x, y = rng.standard_normal((3, 4)), rng.standard_normal((3, 4))
    cases["add"] = ([x, y], lambda v: quadratic(dm.add(v[0], v[1])))
    bias = rng.standard_normal(4)
    cases["add_bias"] = ([x, bias], lambda v: quadratic(dm.add(v[0], v[1])))
    scalar = np.asarray(rng.standard_normal())
    cases["add_scalar"] = ([x, scalar], lambda v: quadratic(dm.add(v[0], v[1])))

    cases["mul"] = ([x, y], lambda v: quadratic(dm.mul(v[0], v[1])))
    cases["mul_scalar"] = ([x, scalar], lambda v: quadratic(dm.mul(v[0], v[1])))

    c1, c2 = rng.standard_normal((2, 3)), rng.standard_normal((4, 3))
    cases["concat"] = ([c1, c2], lambda v: quadratic(dm.concat([v[0], v[1]], axis=0)))
    c3 = rng.standard_normal((2, 5))
    cases["concat_axis1"] = ([c1, c3], lambda v: quadratic(dm.concat([v[0], v[1]], axis=1)))

    table = rng.standard_normal((5, 3))
    index = np.array([0, 2, 2, 4, 1, 2])
    cases["gather_rows"] = ([table], lambda v: quadratic(dm.gather_rows(v[0], index)))

    values = rng.standard_normal((6, 3))
    segments = np.array([1, 0, 2, 1, 1, 0])
    cases["segment_sum"] = ([values], lambda v: quadratic(dm.segment_sum(v[0], segments, 3)))

    z = rng.standard_normal((3, 4))
    cases["swish"] = ([z], lambda v: quadratic(dm.swish(v[0])))
    cases["sigmoid"] = ([z], lambda v: quadratic(dm.sigmoid(v[0])))
    cases["mean"] = ([z], lambda v: dm.mul(dm.mean(v[0]), dm.mean(v[0])))
    cases["sum_all"] = ([z], lambda v: dm.mul(dm.sum_all(v[0]), dm.sum_all(v[0])))

    pred, target = rng.standard_normal((4, 2)), rng.standard_normal((4, 2))
    cases["mse_loss"] = ([pred, target], lambda v: dm.mse_loss(v[0], v[1]))
    logits = rng.standard_normal((5, 1))
    labels = rng.uniform(0.1, 0.9, size=(5, 1))
    cases["binary_cross_entropy_with_logits"] = (
        [logits, labels],
        lambda v: dm.binary_cross_entropy_with_logits(v[0], v[1]),
    )
    return cases


def _relative_error(analytic: np.ndarray, numerical: np.ndarray) -> float:
    scale = max(float(np.abs(numerical).max(initial=0.0)), 1e-10)
    return float(np.abs(analytic - numerical).max(initial=0.0) / scale)


def _check_case(inputs, builder, step=1e-5) -> float:
    values = [DiffValue(np.array(arr, dtype=np.float64)) for arr in inputs]
    loss = builder(values)
    dm.backward(loss)
    analytic = [
        v.grad if v.grad is not None else np.zeros_like(v.data) for v in values
    ]
    arrays = [v.data for v in values]

    def evaluate(current):
        fresh = [DiffValue(arr.copy()) for arr in current]
        return float(builder(fresh).data)

    numerical = dm.numerical_gradient(evaluate, arrays, step=step)
    return max(_relative_error(a, n) for a, n in zip(analytic, numerical))


def _gradcheck_systems(rng: np.random.Generator) -> list[TrainSample]:
    samples = []
    for n in (3, 4):
        positions = rng.uniform(-2.0, 2.0, size=(n, 3))
        numbers = rng.integers(1, 6, size=n)
        system = AtomicSystem(positions=positions, atomic_numbers=numbers)
        samples.append(TrainSample(
            system=system,
            energy=float(rng.standard_normal()),
            forces=rng.standard_normal((n, 3)),
        ))
    return samples


def run_gradient_check(config: FAENetConfig | None = None, seed: int = 0) -> dict:
    """Compare analytic gradients against central differences.

    Checks every composite op on small random inputs, then the full
    forward+loss against finite differences over all model parameters.
    Returns a report dict with PASS/FAIL, the worst offender, and per-op
    errors.
    """
    if config is None:
        config = GRADCHECK_CONFIG
    rng = np.random.default_rng(seed)
    errors: dict[str, float] = {}
    for name, (inputs, builder) in _gradcheck_cases(rng).items():
        errors[name] = _check_case(inputs, builder)

    model = FAENetModel(config, rng)
    samples = _gradcheck_systems(rng)
    systems = [s.system for s in samples]
    energy_targets = np.array([[s.energy] for s in samples])
    force_targets = np.concatenate([s.forces for s in samples], axis=0)
    want_forces = config.predict_forces

    # Full-frame views, graphs, and index maps do not depend on parameters,
    # so they are prepared once; each loss evaluation reruns only the net.
    all_views, view_sample, view_weight, view_back = [], [], [], []
    for index, system in enumerate(systems):
        views, back, _ = _prepare_views(model, system, "full", E3, None)
        for view, rotation in zip(views, back):
            all_views.append(view)
            view_sample.append(index)
            view_weight.append(1.0 / len(views))
            view_back.append(rotation)
    batch = _make_batch(all_views, config, output_ids=np.arange(len(all_views)))
    weights = np.array(view_weight)[:, None]
    view_sample = np.array(view_sample)
    sizes = [view.num_atoms for view in all_views]
    row_starts = np.concatenate(([0], np.cumsum(sizes)))
    target_starts = np.concatenate(([0], np.cumsum([s.num_atoms for s in systems])))

    def build_loss():
        energy_views, force_views = _net(model, batch, want_forces)
        energy = dm.segment_sum(dm.mul(energy_views, dm.constant(weights)),
                                view_sample, len(systems))
        loss = dm.mse_loss(energy, dm.constant(energy_targets))
        if want_forces:
            pieces, atom_targets = [], []
            for v, (sample, rotation, weight) in enumerate(
                zip(view_sample, view_back, view_weight)
            ):
                rows = np.arange(row_starts[v], row_starts[v + 1])
                block = dm.gather_rows(force_views, rows)
                block = dm.matmul(block, dm.constant(rotation))
                block = dm.mul(block, dm.constant(np.asarray(weight)))
                pieces.append(block)
                atom_targets.append(
                    np.arange(target_starts[sample], target_starts[sample + 1])
                )
            forces = dm.segment_sum(dm.concat(pieces, axis=0),
                                    np.concatenate(atom_targets),
                                    int(target_starts[-1]))
            loss = dm.add(loss, dm.mse_loss(forces, dm.constant(force_targets)))
        return loss

    loss = build_loss()
    dm.backward(loss)
    analytic = {
        name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
        for name, p in model.params.items()
    }
    for p in model.params.values():
        p.zero_grad()

    worst_model = 0.0
    step = 1e-5
    for name, p in model.params.items():
        numeric = np.zeros_like(p.data)
        flat = p.data.ravel()
        nflat = numeric.ravel()
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + step
            up = float(build_loss().data)
            flat[i] = original - step
            down = float(build_loss().data)
            flat[i] = original
            nflat[i] = (up - down) / (2.0 * step)
        worst_model = max(worst_model, _relative_error(analytic[name], numeric))
    errors["full_forward_loss"] = worst_model

    worst_op = max(errors, key=errors.get)
    max_err = errors[worst_op]
    return {
        "status": "PASS" if max_err < GRADCHECK_TOLERANCE else "FAIL",
        "tolerance": GRADCHECK_TOLERANCE,
        "max_rel_err": max_err,
        "worst_op": worst_op,
        "ops": errors,
        "seed": seed,
        "config_hash": config.config_hash(),
        "precision": "float64",
    }
