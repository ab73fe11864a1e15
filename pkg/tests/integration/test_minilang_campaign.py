"""
End-to-end mini-language campaign checked against the exact census.

Every program below 48 bytes is enumerated and type-checked in-process; the sampled
campaign must land within two points of the CQ that census predicts for its bucket mix.
"""
from collections import Counter

import numpy as np
import pytest

from src.core.engine import create_campaign_engine, load_campaign_spec
from src.core.harness import Verdict
from src.core.sampler import census
from src.demo.minilang_check import check_program
from tests.conftest import CONFIGS
from tests.integration.conftest import WORKERS

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def oracle(shared_minilang_space):
    programs = census(shared_minilang_space, 0, 48, num_buckets=6)
    valid = {s.index: check_program(s.text) is None for s in programs.samples}
    population = Counter(s.bucket for s in programs.samples)
    accepted = Counter(s.bucket for s in programs.samples if valid[s.index])
    return {"total": len(programs), "valid": valid, "population": population, "accepted": accepted}


def test_census_oracle(oracle):
    assert oracle["total"] == 51568
    assert sum(oracle["valid"].values()) == 36424
    assert [oracle["population"][j] for j in range(6)] == [0, 16, 160, 704, 5632, 45056]
    assert [oracle["accepted"][j] for j in range(6)] == [0, 16, 128, 668, 4412, 31200]


def test_campaign_matches_census(oracle, tmp_path):
    spec = load_campaign_spec(CONFIGS / "minilang_campaign.json", output_dir=str(tmp_path), workers=WORKERS)

    state = create_campaign_engine("measure").invoke({"spec": spec})
    report = state["report"]

    expected = []
    for sample_set, campaign in zip(state["sample_sets"], state["campaigns"]):
        by_index = {r.index: r.verdict for r in campaign.results}
        for s in sample_set.samples:
            assert (by_index[s.index] == Verdict.ACCEPTED) == oracle["valid"][s.index]

        counts = Counter(s.bucket for s in sample_set.samples)
        expected.append(100.0 * sum(
            counts[j] * oracle["accepted"][j] / oracle["population"][j] for j in counts
        ) / sum(counts.values()))

    assert abs(report.cq - float(np.mean(expected))) <= 2.0
    assert report.relative_std_dev < 5.0
    assert report.verdict_breakdown["timeout"] == report.verdict_breakdown["crashed"] == 0
