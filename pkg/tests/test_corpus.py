import pytest

from etsan.config import Config, run_file
from etsan.harness import load_corpus

BUGS = load_corpus("bugs")
CLEAN = load_corpus("clean")


def test_corpus_sizes():
    assert len(BUGS) >= 12 and len(CLEAN) >= 10


@pytest.mark.parametrize("prog", BUGS, ids=lambda p: p.name)
def test_bug_flags_exactly_its_bucket(prog):
    report = run_file(prog.path, Config())
    assert report.halted_by == "Completed"
    expected = set() if prog.expect is None else {prog.expect}
    assert report.bucket_keys == expected


@pytest.mark.parametrize("prog", CLEAN, ids=lambda p: p.name)
def test_clean_program_matches_uninstrumented(prog):
    full = run_file(prog.path, Config())
    plain = run_file(prog.path, Config(variant="none"))
    assert full.buckets == [] and full.halted_by == "Completed"
    assert (full.return_value, full.output, full.memory_digest) == (
        plain.return_value, plain.output, plain.memory_digest)
