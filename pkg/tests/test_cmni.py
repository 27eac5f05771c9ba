import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mirrornet.cmni import (
    NeuronDelta, Thresholds, amplification, classify_case, cmni, deltas, neuron_delta, read_report, write_report,
)

# Layer-1 mean activations of the 2x17 reference checkpoint: none, frog, toad, both
LAYER1 = {
    3: (0.00471, 0.04827, 0.03987, 0.10065),
    7: (0.00270, 0.05432, 0.03930, 0.12933),
    9: (0.02035, 0.01283, 0.07424, 0.01121),
    11: (0.03000, 0.03451, 0.09562, 0.03632),
    12: (0.02022, 0.06299, 0.03550, 0.10880),
    13: (0.01653, 0.05898, 0.03298, 0.10155),
}
EXPECTED = {  # neuron: (delta frog, delta toad), worked by hand
    3: (0.04356, 0.03516),
    7: (0.05162, 0.03660),
    9: (-0.00752, 0.05389),
    11: (0.00451, 0.06562),
    12: (0.04277, 0.01528),
    13: (0.04245, 0.01645),
}


def means(values):
    return dict(zip(((0, 0), (1, 0), (0, 1), (1, 1)), values))


@pytest.mark.parametrize("n", sorted(EXPECTED))
def test_reference_deltas(n):
    d = neuron_delta(1, n, means(LAYER1[n]))
    df, dt = EXPECTED[n]
    assert abs(d.delta_frog - df) < 1e-6 and abs(d.delta_toad - dt) < 1e-6
    assert abs(d.mns - min(df, dt)) < 1e-6


def test_reference_roles():
    rep = cmni([neuron_delta(1, n, means(v)) for n, v in LAYER1.items()])
    assert rep.candidates == [(1, 3), (1, 7), (1, 12), (1, 13)]
    assert rep.differentiators == [(1, 9), (1, 11)]


def test_amplification_under_dual_distress():
    # summary-table means: L1N3 0.0047 -> 0.1007, L1N7 0.0027 -> 0.1293
    a3 = amplification(neuron_delta(1, 3, means((0.0047, 0.0424, 0.0399, 0.1007))))
    a7 = amplification(neuron_delta(1, 7, means((0.0027, 0.0437, 0.0393, 0.1293))))
    assert round(a3) == 21 and round(a7) == 48
    assert amplification(neuron_delta(1, 0, means((0.0, 1.0, 1.0, 1.0)))) is None


# (hidden layers, neurons/layer, published MNE, published CMNI), five decimals each
TABLE_ROWS = [
    (2, 11, 0.31917, 0.01228), (1, 15, 0.22439, 0.01181), (2, 9, 0.24761, 0.01125),
    (1, 11, 0.16879, 0.01125), (1, 10, 0.15665, 0.01119), (2, 10, 0.01100, 0.00046),
    (3, 11, 0.00944, 0.00026), (3, 10, 0.01529, 0.00045), (3, 10, 0.00989, 0.00029),
    (3, 10, 0.01679, 0.00049),
]


@pytest.mark.parametrize("layers,width,mne,index", TABLE_ROWS)
def test_published_rows_divide_by_hidden_plus_output(layers, width, mne, index):
    n = layers * width + 4
    half = 0.5e-5
    lo, hi = (mne - half) / n, (mne + half) / n
    assert lo <= index + half and hi >= index - half


def test_wrong_denominator_is_rejected_by_table():
    # hidden-only N fails at least one published row
    def fits(n, mne, index):
        return (mne - 0.5e-5) / n <= index + 0.5e-5 and (mne + 0.5e-5) / n >= index - 0.5e-5
    assert not all(fits(l * w, m, i) for l, w, m, i in TABLE_ROWS)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(*[st.floats(-5, 5)] * 4), min_size=1, max_size=60))
def test_cmni_identity(values):
    ds = [neuron_delta(1, i, means(v)) for i, v in enumerate(values)]
    rep = cmni(ds)
    assert abs(rep.cmni * rep.n_neurons - math.fsum(d.mns for d in ds)) < 1e-12
    assert rep.n_neurons == len(values)


def test_shift_invariance_and_scaling():
    rng = np.random.default_rng(0)
    vals = rng.random((10, 4))
    base = cmni([neuron_delta(1, i, means(v)) for i, v in enumerate(vals)])
    shifted = cmni([neuron_delta(1, i, means(v + 3.0)) for i, v in enumerate(vals)])
    scaled = cmni([neuron_delta(1, i, means(v * 2.0)) for i, v in enumerate(vals)])
    assert shifted.cmni == pytest.approx(base.cmni, abs=1e-12)
    assert scaled.cmni == pytest.approx(2 * base.cmni)


def test_layer_dims_coverage_and_duplicates():
    ds = [neuron_delta(l, n, means((0, 0.1, 0.1, 0))) for l, w in ((1, 5), (2, 4)) for n in range(w)]
    assert cmni(ds, layer_dims=[100, 5, 4]).n_neurons == 9
    with pytest.raises(ValueError):
        cmni(ds[:-1], layer_dims=[100, 5, 4])
    with pytest.raises(ValueError):
        cmni(ds + ds[:1])
    with pytest.raises(ValueError):
        cmni([])


def test_deltas_from_stats_rejects_missing_scenario():
    s = SimpleNamespace(layer=1, neuron=0, mean={(0, 0): 0.0, (1, 0): 1.0, (0, 1): 1.0})
    with pytest.raises(ValueError, match="missing"):
        deltas([s])


def test_thresholds_validate():
    with pytest.raises(ValueError):
        Thresholds(candidate=0.0)


def test_classify_case_ranks_by_mns():
    rep = cmni([neuron_delta(1, n, means(v)) for n, v in LAYER1.items()])
    rows = classify_case(rep)
    assert [(r.role, r.neuron) for r in rows] == [
        ("candidate", 7), ("candidate", 3), ("candidate", 13), ("candidate", 12),
        ("differentiator", 11), ("differentiator", 9),
    ]


def test_report_round_trip(tmp_path):
    rep = cmni([neuron_delta(1, n, means(v)) for n, v in LAYER1.items()], Thresholds(0.012, 0.03))
    path = write_report(rep, tmp_path / "cmni.json", tmp_path / "cmni.csv")
    assert read_report(path) == rep
    lines = (tmp_path / "cmni.csv").read_text().splitlines()
    assert len(lines) == 1 + len(LAYER1)
    assert isinstance(rep.deltas[0], NeuronDelta)
