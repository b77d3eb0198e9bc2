from __future__ import annotations

import random

import pytest

from fusekit import (
    Cutoffs,
    EvalReport,
    Qrels,
    RunSet,
    ScoredList,
    ValidationError,
    delta_report,
    evaluate,
    ndcg_at_k,
    recall_at_k,
)
from fusekit.metrics import (
    format_delta,
    render_delta,
    render_report,
    report_from_json,
    report_records,
    report_to_json,
)

from conftest import make_list
from reference_eval import (
    CUTOFF_VALUES,
    FIXTURE_JUDGMENTS,
    FIXTURE_RANKINGS,
    ref_ndcg,
    ref_recall,
)


def qrels_from(judged_by_query: dict[str, dict[str, int]]) -> Qrels:
    return Qrels(
        {
            (qid, doc): grade
            for qid, judged in judged_by_query.items()
            for doc, grade in judged.items()
        }
    )


def run_from(rankings: dict[str, list[str]], tag="fixture") -> RunSet:
    return RunSet(
        lists={
            qid: ScoredList(tuple((doc, float(len(docs) - i)) for i, doc in enumerate(docs)))
            for qid, docs in rankings.items()
        },
        tag=tag,
    )


# ---------------------------------------------------------------------------
# ndcg / recall
# ---------------------------------------------------------------------------


def test_ndcg_perfect_single_relevant():
    qrels = qrels_from({"q": {"dA": 1}})
    ranking = make_list(("dA", 0.9), ("dB", 0.1))
    assert ndcg_at_k(ranking, qrels, "q", 10) == 1.0


def test_ndcg_relevant_at_rank_two():
    qrels = qrels_from({"q": {"dA": 1}})
    ranking = make_list(("dB", 0.9), ("dA", 0.1))
    # hand value: (1/log2(3)) / 1
    assert ndcg_at_k(ranking, qrels, "q", 10) == pytest.approx(0.6309297535714574, abs=1e-12)


def test_ndcg_no_relevant_docs_is_zero():
    qrels = qrels_from({"q": {"dA": 0}})
    assert ndcg_at_k(make_list(("dA", 1.0)), qrels, "q", 10) == 0.0


def test_ndcg_unjudged_docs_count_as_grade_zero():
    qrels = qrels_from({"q": {"dA": 1}})
    ranking = make_list(("zz", 0.9), ("dA", 0.1))
    assert ndcg_at_k(ranking, qrels, "q", 10) == pytest.approx(0.6309297535714574, abs=1e-12)


def test_ndcg_rejects_bad_cutoff():
    qrels = qrels_from({"q": {"dA": 1}})
    with pytest.raises(ValueError):
        ndcg_at_k(make_list(("dA", 1.0)), qrels, "q", 0)


def test_recall_fractions():
    judged = {f"d{i}": 1 for i in range(5)}
    qrels = qrels_from({"q": judged})
    ranking = make_list(("d0", 0.9), ("d1", 0.8), ("d2", 0.7), ("x1", 0.6), ("x2", 0.5))
    assert recall_at_k(ranking, qrels, "q", 10) == pytest.approx(0.6)


def test_recall_all_found():
    qrels = qrels_from({"q": {"d0": 1, "d1": 2}})
    ranking = make_list(("d0", 0.9), ("d1", 0.8))
    assert recall_at_k(ranking, qrels, "q", 10) == 1.0


def test_recall_zero_when_relevant_below_cutoff():
    qrels = qrels_from({"q": {"d9": 1}})
    ranking = make_list(("d0", 0.9), ("d1", 0.8), ("d9", 0.1))
    assert recall_at_k(ranking, qrels, "q", 2) == 0.0


# ---------------------------------------------------------------------------
# evaluate against the independent reference evaluator
# ---------------------------------------------------------------------------


def test_evaluate_perfect_ranking(perfect_run, simple_qrels):
    report = evaluate(perfect_run, simple_qrels, Cutoffs((10,)))
    assert report.aggregate == {"nDCG@10": 1.0, "R@10": 1.0}


def test_evaluate_three_query_fixture_matches_reference():
    rankings = {q: FIXTURE_RANKINGS[q] for q in ("q1", "q2", "q3")}
    judged = {q: FIXTURE_JUDGMENTS[q] for q in ("q1", "q2", "q3")}
    report = evaluate(run_from(rankings), qrels_from(judged), Cutoffs(CUTOFF_VALUES))
    for qid, ranked in rankings.items():
        for k in CUTOFF_VALUES:
            assert report.per_query[qid][f"nDCG@{k}"] == pytest.approx(
                ref_ndcg(ranked, judged[qid], k), abs=1e-6
            )
            assert report.per_query[qid][f"R@{k}"] == pytest.approx(
                ref_recall(ranked, judged[qid], k), abs=1e-6
            )
    # frozen oracle values for the hand-checkable queries
    assert report.per_query["q1"]["nDCG@10"] == pytest.approx(0.5113881456198478, abs=1e-9)
    assert report.per_query["q1"]["R@10"] == pytest.approx(2 / 3, abs=1e-9)
    assert report.per_query["q2"]["nDCG@20"] == 1.0
    assert report.per_query["q3"]["nDCG@100"] == 0.0


def test_evaluate_empty_run_is_error():
    with pytest.raises(ValidationError):
        evaluate(RunSet(lists={}, tag="t"), Qrels({}), Cutoffs((10,)))


def test_evaluate_missing_query_errors_by_default(simple_qrels):
    run = RunSet(lists={"zz": make_list(("dA", 1.0))}, tag="t")
    with pytest.raises(ValidationError):
        evaluate(run, simple_qrels, Cutoffs((10,)))


def test_evaluate_missing_query_skip_mode(simple_qrels, perfect_run):
    lists = dict(perfect_run.lists)
    lists["zz"] = make_list(("dA", 1.0))
    report = evaluate(RunSet(lists=lists, tag="t"), simple_qrels, Cutoffs((10,)), on_missing="skip")
    assert set(report.per_query) == {"q1"}


def test_evaluate_exclude_no_relevant_flag():
    rankings = {"q2": FIXTURE_RANKINGS["q2"], "q3": FIXTURE_RANKINGS["q3"]}
    judged = {"q2": FIXTURE_JUDGMENTS["q2"], "q3": FIXTURE_JUDGMENTS["q3"]}
    cutoffs = Cutoffs((10,))
    with_all = evaluate(run_from(rankings), qrels_from(judged), cutoffs)
    assert with_all.aggregate["nDCG@10"] == pytest.approx(0.5)
    excluded = evaluate(run_from(rankings), qrels_from(judged), cutoffs, exclude_no_relevant=True)
    assert set(excluded.per_query) == {"q2"}
    assert excluded.aggregate["nDCG@10"] == 1.0


def test_evaluate_aggregate_is_exact_mean():
    report = evaluate(
        run_from(FIXTURE_RANKINGS), qrels_from(FIXTURE_JUDGMENTS), Cutoffs(CUTOFF_VALUES)
    )
    for name, value in report.aggregate.items():
        assert value == sum(r[name] for r in report.per_query.values()) / len(report.per_query)


def test_recall_monotone_in_k_and_ndcg_bounded():
    # recall@k never decreases with k; nDCG@k stays in [0, 1] but is not
    # monotone in k under the standard same-cutoff-IDCG definition
    report_rankings = run_from(FIXTURE_RANKINGS)
    qrels = qrels_from(FIXTURE_JUDGMENTS)
    for qid, ranking in report_rankings.lists.items():
        previous_recall = 0.0
        for k in (1, 2, 3, 5, 8, 13, 21, 50):
            n = ndcg_at_k(ranking, qrels, qid, k)
            r = recall_at_k(ranking, qrels, qid, k)
            assert 0.0 <= n <= 1.0 + 1e-12
            assert r >= previous_recall
            previous_recall = r


def test_ndcg_can_legitimately_decrease_with_k():
    # grade-1 docs at ranks 1 and 3: perfect at k=1, below 1 at k=2
    qrels = qrels_from({"q": {"d0": 1, "d2": 1}})
    ranking = make_list(("d0", 0.9), ("d1", 0.8), ("d2", 0.7))
    assert ndcg_at_k(ranking, qrels, "q", 1) == 1.0
    assert ndcg_at_k(ranking, qrels, "q", 2) < 1.0


def test_swapping_in_a_lower_grade_never_helps():
    rng = random.Random(5)
    judged = {f"d{i}": rng.choice([0, 0, 1, 2, 3]) for i in range(8)}
    qrels = qrels_from({"q": judged})
    docs = list(judged)
    for _ in range(50):
        rng.shuffle(docs)
        ranking = ScoredList(tuple((d, float(len(docs) - i)) for i, d in enumerate(docs)))
        base = ndcg_at_k(ranking, qrels, "q", 8)
        i, j = sorted(rng.sample(range(len(docs)), 2))
        if judged[docs[i]] <= judged[docs[j]]:
            continue  # only swaps that move a lower grade up
        swapped = docs[:]
        swapped[i], swapped[j] = swapped[j], swapped[i]
        worse = ScoredList(tuple((d, float(len(docs) - i)) for i, d in enumerate(swapped)))
        assert ndcg_at_k(worse, qrels, "q", 8) <= base + 1e-12


def test_recall_invariant_to_permutation_within_top_k():
    qrels = qrels_from({"q": {"d0": 1, "d2": 2}})
    a = make_list(("d0", 0.9), ("d1", 0.8), ("d2", 0.7))
    b = make_list(("d2", 0.9), ("d0", 0.8), ("d1", 0.7))
    assert recall_at_k(a, qrels, "q", 3) == recall_at_k(b, qrels, "q", 3)


def test_ndcg_one_iff_ideal_prefix():
    qrels = qrels_from({"q": {"d0": 3, "d1": 1, "d2": 1}})
    ideal = make_list(("d0", 0.9), ("d2", 0.8), ("d1", 0.7))  # equal grades may reorder
    assert ndcg_at_k(ideal, qrels, "q", 3) == pytest.approx(1.0, abs=1e-12)
    not_ideal = make_list(("d1", 0.9), ("d0", 0.8), ("d2", 0.7))
    assert ndcg_at_k(not_ideal, qrels, "q", 3) < 1.0


# ---------------------------------------------------------------------------
# delta reports
# ---------------------------------------------------------------------------


def _report(values: dict[str, float], tag: str) -> EvalReport:
    return EvalReport(per_query={}, aggregate=values, tag=tag)


def test_delta_large_improvement_row():
    baseline = _report({"nDCG@10": 0.195}, "first-stage")
    candidate = _report({"nDCG@10": 0.542}, "reranked")
    result = delta_report(baseline, candidate)
    assert format_delta(result.deltas["nDCG@10"]) == "177.95"


def test_delta_small_improvement_row():
    result = delta_report(_report({"nDCG@10": 0.700}, "a"), _report({"nDCG@10": 0.759}, "b"))
    assert format_delta(result.deltas["nDCG@10"]) == "8.43"


def test_delta_degradation_row():
    result = delta_report(_report({"nDCG@10": 0.722}, "a"), _report({"nDCG@10": 0.399}, "b"))
    assert format_delta(result.deltas["nDCG@10"]) == "-44.74"


def test_delta_identical_reports_all_na():
    report = _report({"nDCG@10": 0.7, "R@100": 0.494}, "same")
    result = delta_report(report, report)
    assert all(v is None for v in result.deltas.values())
    rendered = render_delta(result)
    assert rendered.count("N/A") == 2


def test_delta_zero_baseline_is_na():
    result = delta_report(_report({"R@10": 0.0}, "a"), _report({"R@10": 0.3}, "b"))
    assert result.deltas["R@10"] is None


def test_delta_metric_mismatch_is_error():
    with pytest.raises(ValidationError):
        delta_report(_report({"nDCG@10": 0.5}, "a"), _report({"R@10": 0.5}, "b"))


# ---------------------------------------------------------------------------
# report plumbing
# ---------------------------------------------------------------------------


def test_report_validates_value_range():
    with pytest.raises(ValidationError):
        EvalReport(per_query={}, aggregate={"nDCG@10": 1.5})


def test_report_validates_aggregate_consistency():
    with pytest.raises(ValidationError):
        EvalReport(per_query={"q1": {"R@10": 0.4}}, aggregate={"R@10": 0.9})


def test_report_json_round_trip():
    report = evaluate(
        run_from(FIXTURE_RANKINGS), qrels_from(FIXTURE_JUDGMENTS), Cutoffs(CUTOFF_VALUES)
    )
    loaded = report_from_json(report_to_json(report))
    assert loaded == report


def test_report_records_cover_queries_and_aggregate():
    report = evaluate(run_from(FIXTURE_RANKINGS), qrels_from(FIXTURE_JUDGMENTS), Cutoffs((10,)))
    records = report_records(report)
    assert {r["query"] for r in records} == set(FIXTURE_RANKINGS) | {"all"}
    assert all(r["metric"] in ("nDCG@10", "R@10") for r in records)


def test_render_report_formats_three_decimals(perfect_run, simple_qrels):
    text = render_report(evaluate(perfect_run, simple_qrels, Cutoffs((10,))))
    assert "nDCG@10" in text and "1.000" in text
