"""Distress pathways read off checkpoint weights.

Layers use the L-notation of the analysis reports: L0 is the input, L1..Lk the
hidden layers and L(k+1) the output. Weight z-scores are taken relative to
every weight in the same layer-to-layer matrix (population standard deviation).
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .env import Action
from .neural import Network

PATHWAY_NAMES = {
    "mirror-driven": "self-preservation",
    "differentiator-driven": "tactical help",
    "mixed": "empathy-influenced help",
}


@dataclass(frozen=True)
class WeightEdge:
    from_layer: int
    from_neuron: int
    to_layer: int
    to_neuron: int
    weight: float
    zscore: float

    @property
    def label(self) -> str:
        return f"L{self.from_layer}N{self.from_neuron}->L{self.to_layer}N{self.to_neuron}"


@dataclass(frozen=True)
class HubThresholds:
    edge_z: float = 0.5  # an input counts toward a hub at or above this z-score
    hub_z: float = 2.0  # summed qualifying input z needed to call a unit a hub
    mirror_share: float = 0.8
    differentiator_share: float = 0.2
    dominance_gap: float = 1.0  # z-units between the top outgoing edge and the rest
    report_z: float = 0.5  # graph edges kept when |z| reaches this

    def __post_init__(self) -> None:
        for name in ("edge_z", "hub_z", "dominance_gap", "report_z"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.differentiator_share < self.mirror_share < 1.0:
            raise ValueError("need 0 < differentiator_share < mirror_share < 1")


@dataclass(frozen=True)
class CircuitGraph:
    name: str
    kind: str  # mirror-driven, differentiator-driven or mixed
    hub: tuple[int, int]
    candidate_share: float
    incoming: list[WeightEdge] = field(default_factory=list)
    outgoing: list[WeightEdge] = field(default_factory=list)
    action_target: Action | None = None


def zscore_matrix(w) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    sd = w.std()
    if not sd > 0:
        raise ValueError("weight matrix has zero spread; z-scores undefined")
    return (w - w.mean()) / sd


def _matrix(net: Network, from_layer: int, to_layer: int) -> np.ndarray:
    if to_layer != from_layer + 1:
        raise ValueError(f"layers L{from_layer} and L{to_layer} are not adjacent")
    if not 0 <= from_layer < len(net.weights):
        raise ValueError(f"no weight matrix leaves L{from_layer}")
    return net.weights[from_layer]


def edge_zscores(net: Network, from_layer: int, to_layer: int) -> list[WeightEdge]:
    """One edge per weight of the ``from_layer -> to_layer`` matrix."""
    w = _matrix(net, from_layer, to_layer)
    z = zscore_matrix(w)
    return [
        WeightEdge(from_layer, j, to_layer, i, float(w[i, j]), float(z[i, j]))
        for i in range(w.shape[0])
        for j in range(w.shape[1])
    ]


def _sorted(edges) -> list[WeightEdge]:
    return sorted(edges, key=lambda e: (-abs(e.zscore), e.from_layer, e.from_neuron, e.to_neuron))


def _dominant(z_out: np.ndarray, gap: float) -> int | None:
    if len(z_out) < 2:
        return 0 if len(z_out) else None
    order = np.argsort(-z_out, kind="stable")
    return int(order[0]) if z_out[order[0]] - z_out[order[1]] >= gap else None


def find_hubs(net: Network, candidates, differentiators, thresholds: HubThresholds = HubThresholds()) -> list[CircuitGraph]:
    """Layer-2 units fed by first-layer candidate or differentiator neurons.

    ``candidates`` and ``differentiators`` are ``(layer, neuron)`` pairs as
    produced by the CMNI report; only first-layer entries are used.
    """
    cand = sorted(n for l, n in candidates if l == 1)
    diff = sorted(n for l, n in differentiators if l == 1 and n not in cand)
    if not cand:
        raise ValueError("no first-layer mirror candidates supplied")
    w_in = _matrix(net, 1, 2)
    z_in = zscore_matrix(w_in)
    hub_is_output = len(net.weights) == 2
    z_out = None if hub_is_output else zscore_matrix(net.weights[2])
    graphs = []
    for h in range(w_in.shape[0]):
        ok = (w_in[h] > 0) & (z_in[h] >= thresholds.edge_z)
        c_sum = float(z_in[h, cand][ok[cand]].sum())
        d_sum = float(z_in[h, diff][ok[diff]].sum()) if diff else 0.0
        total = c_sum + d_sum
        if total < thresholds.hub_z:
            continue
        share = c_sum / total
        if share >= thresholds.mirror_share:
            kind = "mirror-driven"
        elif share <= thresholds.differentiator_share:
            kind = "differentiator-driven"
        else:
            kind = "mixed"
        incoming = [
            WeightEdge(1, j, 2, h, float(w_in[h, j]), float(z_in[h, j]))
            for j in range(w_in.shape[1])
            if abs(z_in[h, j]) >= thresholds.report_z
        ]
        outgoing = []
        if hub_is_output:
            target = Action(h)
        else:
            w_out = net.weights[2]
            top = _dominant(z_out[:, h], thresholds.dominance_gap)
            target = Action(top) if top is not None and len(net.weights) == 3 else None
            outgoing = [
                WeightEdge(2, h, 3, i, float(w_out[i, h]), float(z_out[i, h]))
                for i in range(w_out.shape[0])
                if abs(z_out[i, h]) >= thresholds.report_z
            ]
        graphs.append(
            CircuitGraph(
                name=f"{PATHWAY_NAMES[kind]} (L2N{h})",
                kind=kind,
                hub=(2, h),
                candidate_share=share,
                incoming=_sorted(incoming),
                outgoing=_sorted(outgoing),
                action_target=target,
            )
        )
    return graphs


# --- export ------------------------------------------------------------------------

def _graph_to_dict(g: CircuitGraph) -> dict:
    return {
        "name": g.name,
        "kind": g.kind,
        "hub": list(g.hub),
        "candidate_share": g.candidate_share,
        "action_target": None if g.action_target is None else g.action_target.name.lower(),
        "incoming": [asdict(e) for e in g.incoming],
        "outgoing": [asdict(e) for e in g.outgoing],
    }


def _graph_from_dict(d: dict) -> CircuitGraph:
    target = d["action_target"]
    return CircuitGraph(
        name=d["name"],
        kind=d["kind"],
        hub=tuple(d["hub"]),
        candidate_share=float(d["candidate_share"]),
        incoming=[WeightEdge(**e) for e in d["incoming"]],
        outgoing=[WeightEdge(**e) for e in d["outgoing"]],
        action_target=None if target is None else Action[target.upper()],
    )


def _node(layer: int, neuron: int, output_layer: int | None) -> dict:
    node = {"id": f"L{layer}N{neuron}", "layer": layer, "neuron": neuron}
    if output_layer is not None and layer == output_layer:
        node["action"] = Action(neuron).name.lower()
    return node


def export_graph(graphs, path, output_layer: int | None = None) -> Path:
    """Write graphs as JSON plus a ``.txt`` adjacency summary next to it."""
    path = Path(path)
    graphs = list(graphs)
    nodes, edges = {}, {}
    for g in graphs:
        nodes[g.hub] = _node(*g.hub, output_layer)
        for e in (*g.incoming, *g.outgoing):
            nodes[(e.from_layer, e.from_neuron)] = _node(e.from_layer, e.from_neuron, output_layer)
            nodes[(e.to_layer, e.to_neuron)] = _node(e.to_layer, e.to_neuron, output_layer)
            edges[(e.from_layer, e.from_neuron, e.to_layer, e.to_neuron)] = asdict(e)
    doc = {
        "nodes": [nodes[k] for k in sorted(nodes)],
        "edges": [edges[k] for k in sorted(edges)],
        "graphs": [_graph_to_dict(g) for g in graphs],
    }
    lines = []
    for g in graphs:
        target = "-" if g.action_target is None else g.action_target.name.lower()
        lines.append(f"{g.name}: hub L{g.hub[0]}N{g.hub[1]} kind={g.kind} "
                     f"candidate_share={g.candidate_share:.3f} action={target}")
        for e in g.incoming + g.outgoing:
            lines.append(f"  {e.label} weight={e.weight:.4f} z={e.zscore:.2f}")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(doc, indent=2) + "\n")
        path.with_suffix(".txt").write_text("".join(line + "\n" for line in lines))
    except OSError as exc:
        raise OSError(f"cannot write circuit graph to {path}: {exc.strerror or exc}") from exc
    return path


def read_graph(path) -> list[CircuitGraph]:
    doc = json.loads(Path(path).read_text())
    return [_graph_from_dict(d) for d in doc["graphs"]]
