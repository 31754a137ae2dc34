import json
import math

import numpy as np
import pytest

from isingcm import experiments as E
from isingcm.ising1d import IsingParams

P = IsingParams(0.5, 0.2)


def _cfg(**kw):
    base = dict(model="cm2", N=1000, params=P, R=20, M=100, seed=3)
    base.update(kw)
    return E.ExperimentConfig(**base)


@pytest.mark.parametrize(
    "kw",
    [dict(N=50), dict(R=0), dict(M=0), dict(level=1.0), dict(model="er"), dict(model="cm12"), dict(model="custom"), dict(threads=0)],
)
def test_config_validation(kw):
    with pytest.raises(ValueError):
        _cfg(**kw)


def test_config_round_trip():
    c = _cfg(model="custom", pmf={1: 0.5, 3: 0.5})
    assert E.ExperimentConfig.from_dict(json.loads(json.dumps(c.as_dict()))) == c


def test_report_json_round_trip():
    rep = E.rq_clt_experiment(_cfg(M=500))
    back = E.ExperimentReport.from_json(rep.to_json())
    assert back.to_json() == rep.to_json()
    assert back.passed == rep.passed
    assert dict(rep.csv_rows())["experiment"] == "rq_clt"


def test_reports_independent_of_threads():
    a = E.aq_clt_experiment(_cfg(model="cm12", p=0.5, threads=1))
    b = E.aq_clt_experiment(_cfg(model="cm12", p=0.5, threads=3))
    da, db = a.to_dict(), b.to_dict()
    for d in (da, db):
        d.pop("runtime")
        d["config"].pop("threads")
    assert json.dumps(da, sort_keys=True) == json.dumps(db, sort_keys=True)


def test_same_seed_same_report():
    a = E.graph_fluctuation_experiment(_cfg(model="cm12", p=0.5, R=50))
    b = E.graph_fluctuation_experiment(_cfg(model="cm12", p=0.5, R=50))
    assert a.metrics == b.metrics


def test_rq_infinite_temperature():
    Q = IsingParams(0.0, 0.4)
    for model, p in (("cm2", None), ("cm12", 0.5)):
        rep = E.rq_clt_experiment(_cfg(model=model, p=p, params=Q, M=5000))
        m = rep.metrics
        assert abs(m["variance"] - (1 - math.tanh(0.4) ** 2)) < 4 * m["variance_se"]


def test_rq_cm12_near_limit():
    rep = E.rq_clt_experiment(_cfg(model="cm12", p=0.5, N=10**4, M=5000))
    m = rep.metrics
    # finite-size slack of order 1/sqrt(N)
    assert abs(m["variance"] - m["chi_limit"]) < 3 * m["variance_se"] + 1 / math.sqrt(10**4)
    assert rep.passed


def test_rq_mcmc_fallback():
    rep = E.rq_clt_experiment(_cfg(model="custom", pmf={3: 1.0}, N=200, M=200, params=IsingParams(0.2, 0.0)))
    assert rep.metrics["sampler"] == "mcmc"
    assert "ks_p_value" in rep.metrics


def test_aq_infinite_temperature():
    Q = IsingParams(0.0, 0.3)
    for model, p in (("cm2", None), ("cm12", 0.5)):
        rep = E.aq_clt_experiment(_cfg(model=model, p=p, params=Q, R=40, M=100))
        m = rep.metrics
        assert abs(m["variance"] - (1 - math.tanh(0.3) ** 2)) < 4 * m["variance_se"]
        assert m["sigma_G2"] == 0.0


def test_aq_total_variance_identity():
    rep = E.aq_clt_experiment(_cfg(model="cm12", p=0.5))
    m = rep.metrics
    assert m["total_variance_direct"] == pytest.approx(m["total_variance_decomposed"], rel=1e-9)
    assert m["mixture_variance_raw"] == pytest.approx(m["mixture_variance_decomposed"], rel=1e-9)


def test_aq_rejects_custom_model():
    with pytest.raises(ValueError):
        E.aq_clt_experiment(_cfg(model="custom", pmf={2: 1.0}))


def test_doubling_M_halves_within_graph_se():
    se = []
    for M in (4000, 16000):
        se.append(E.rq_clt_experiment(_cfg(M=M)).metrics["variance_se"])
    assert se[1] / se[0] == pytest.approx(0.5, rel=0.2)


def test_doubling_R_halves_across_graph_se():
    se = []
    for R in (500, 2000):
        se.append(E.graph_fluctuation_experiment(_cfg(model="cm12", p=0.5, N=2000, R=R)).metrics["variance_X_se"])
    assert se[1] / se[0] == pytest.approx(0.5, rel=0.2)


def test_graph_fluctuations_vanish_at_infinite_temperature():
    rep = E.graph_fluctuation_experiment(_cfg(model="cm12", p=0.5, params=IsingParams(0.0, 0.5), R=30))
    assert rep.passed
    assert any(c.name == "X_vanishes" and c.passed for c in rep.criteria)


def test_graph_fluctuation_requires_cm12():
    with pytest.raises(ValueError):
        E.graph_fluctuation_experiment(_cfg())


def test_lln_binomial_oracle():
    rep = E.lln_experiment(_cfg(params=IsingParams(0.0, 0.5), M=4000, R=10, N=100), 0.1, [100, 400, 1600])
    assert rep.passed
    for c in rep.metrics["rq_cells"]:
        assert "exact" in c


def test_binomial_exceedance():
    # N = 2, B = 0: S/N in {-1, 0, 1} with probabilities 1/4, 1/2, 1/4
    assert E.binomial_exceedance(2, 0.0, 0.5) == pytest.approx(0.5)
    assert E.binomial_exceedance(2, 0.0, 1.5) == 0.0


def test_lln_trivial_epsilon():
    rep = E.lln_experiment(_cfg(M=200, R=4, N=100), 2.5, [100, 200])
    assert rep.passed
    assert all(c["probability"] == 0.0 and not c["upper_bound"] for c in rep.metrics["rq_cells"])


def test_lln_decay_and_zero_hit_bounds():
    rep = E.lln_experiment(_cfg(M=2000, R=20, N=100), 0.1, [100, 1000, 10000])
    assert rep.passed
    last = rep.metrics["rq_cells"][-1]
    assert last["hits"] == 0 and last["upper_bound"] and last["probability"] == pytest.approx(3 / 2000)


def test_lln_validation():
    with pytest.raises(ValueError):
        E.lln_experiment(_cfg(), 0.0, [100])
    with pytest.raises(ValueError):
        E.lln_experiment(_cfg(), 0.1, [1000, 100])


def test_histogram_present():
    rep = E.rq_clt_experiment(_cfg(M=500))
    h = rep.histogram
    assert len(h["edges"]) == len(h["counts"]) + 1 and sum(h["counts"]) == 500
    assert np.isfinite(rep.runtime)
