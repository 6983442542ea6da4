import sys
import textwrap

import pytest

from adaptaug.augment import AugmentationKind
from adaptaug.evaluators import (
    EvaluatorProtocolError,
    EvaluatorSpecError,
    ExecEvaluator,
    PowerOracle,
    TableEvaluator,
    make_evaluator,
)
from adaptaug.sensitivity import EvaluatorBinding, SAConfig, g_value, solve_levels_adaptive

KIND = AugmentationKind.BLUR

ECHO_EVALUATOR = textwrap.dedent(
    """
    import json, sys
    for line in sys.stdin:
        req = json.loads(line)
        a = req["alpha"]
        print(json.dumps({"ma": 0.9 - 0.6 * a, "kid": a}))
        sys.stdout.flush()
    """
).strip()

BROKEN_EVALUATOR = 'import sys; sys.stdin.readline(); print("not json"); sys.stdout.flush()'


def test_power_oracle_realizes_g_exactly():
    cfg = SAConfig()
    for p in (0.5, 1.0, 2.0, 3.0):
        oracle = PowerOracle(p)
        ma0, _ = oracle(KIND, 0.0)
        ma1, kid1 = oracle(KIND, 1.0)
        for alpha in (0.0, 0.21, 0.5, 0.77, 1.0):
            ma, kd = oracle(KIND, alpha)
            assert 0.0 <= ma <= 1.0
            g = g_value(alpha, ma, kd, ma_clean=ma0, ma_max=ma1, kid_max=kid1, cfg=cfg)
            assert g == pytest.approx(oracle.g_true(alpha), abs=1e-12)


def test_power_oracle_rejects_out_of_family_exponent():
    with pytest.raises(EvaluatorSpecError):
        PowerOracle(4.0)


def test_table_evaluator_interpolates(tmp_path):
    path = tmp_path / "table.csv"
    path.write_text(
        "kind,alpha,ma,kid\n"
        "blur,0.0,0.9,0.0\n"
        "blur,0.5,0.6,0.2\n"
        "blur,1.0,0.1,1.0\n"
    )
    ev = TableEvaluator(path)
    assert ev(KIND, 0.25) == (pytest.approx(0.75), pytest.approx(0.1))
    assert ev(KIND, 1.0) == (pytest.approx(0.1), pytest.approx(1.0))
    with pytest.raises(EvaluatorSpecError, match="no table rows"):
        ev(AugmentationKind.NOISE, 0.5)


def test_table_evaluator_drives_solver(tmp_path):
    path = tmp_path / "table.csv"
    rows = ["kind,alpha,ma,kid"]
    for a in (0.0, 0.25, 0.5, 0.75, 1.0):
        rows.append(f"blur,{a},{0.9 - 0.7 * a},{a}")
    path.write_text("\n".join(rows) + "\n")
    ls = solve_levels_adaptive(EvaluatorBinding(TableEvaluator(path)), KIND, SAConfig())
    assert ls.status == "ok" and len(ls.levels) == 4


def test_table_evaluator_validation(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("kind,alpha,ma\nblur,0,0.9\n")
    with pytest.raises(EvaluatorSpecError, match="header"):
        TableEvaluator(path)
    path.write_text("kind,alpha,ma,kid\nblur,0.2,0.9,0.0\nblur,1.0,0.1,1.0\n")
    with pytest.raises(EvaluatorSpecError, match="cover alpha 0 and 1"):
        TableEvaluator(path)
    with pytest.raises(EvaluatorSpecError):
        TableEvaluator(tmp_path / "missing.csv")


def test_exec_evaluator_round_trip(tmp_path):
    script = tmp_path / "child.py"
    script.write_text(ECHO_EVALUATOR + "\n")
    with ExecEvaluator(f"{sys.executable} {script}") as ev:
        ma, kid = ev(KIND, 0.5)
        assert ma == pytest.approx(0.6)
        assert kid == pytest.approx(0.5)
        ls = solve_levels_adaptive(EvaluatorBinding(ev), KIND, SAConfig())
        assert ls.status == "ok"


def test_exec_evaluator_bad_response():
    with ExecEvaluator(f"{sys.executable} -c '{BROKEN_EVALUATOR}'") as ev:
        with pytest.raises(EvaluatorProtocolError, match="not json"):
            ev(KIND, 0.5)


def test_exec_evaluator_closed_stream():
    with ExecEvaluator(f"{sys.executable} -c 'pass'") as ev:
        with pytest.raises(EvaluatorProtocolError):
            ev(KIND, 0.5)


def test_make_evaluator_dispatch(tmp_path):
    assert isinstance(make_evaluator("analytic:power:2"), PowerOracle)
    table = tmp_path / "t.csv"
    table.write_text("kind,alpha,ma,kid\nblur,0,0.9,0\nblur,1,0.2,1\n")
    assert isinstance(make_evaluator(f"table:{table}"), TableEvaluator)
    with pytest.raises(EvaluatorSpecError):
        make_evaluator("analytic:mystery:2")
    with pytest.raises(EvaluatorSpecError):
        make_evaluator("nope")
    with pytest.raises(EvaluatorSpecError):
        make_evaluator("analytic:power:zebra")
