from rifscope.judgement.engine import VERIFY_SCHEMA, evaluate_suite, run_suites
from rifscope.judgement.suite import FactNamespace, Suite
from rifscope.judgement.suites import SUITES, facts_from_report, load_suites

__all__ = [
    "VERIFY_SCHEMA", "evaluate_suite", "run_suites",
    "FactNamespace", "Suite",
    "SUITES", "facts_from_report", "load_suites",
]
