"""
Document identifiers and validators for the rifscope JSON formats.

  rifscope.poly.v1      a BiPoly: {bidegree, coeffs[[[re, im]]], padded?}
  rifscope.rif.v1       a Rif: {name, p, eta, monomial}
  rifscope.portrait.v1  traced level curves (levelcurves.portrait_to_json)
  rifscope.report.v1    `rifscope analyze` output
  rifscope.verify.v1    `rifscope verify` output

Inputs without a "schema" field are accepted when their shape fits.
"""
from rifscope.judgement.engine import VERIFY_SCHEMA
from rifscope.levelcurves import PORTRAIT_SCHEMA
from rifscope.poly2 import POLY_SCHEMA
from rifscope.rif import RIF_SCHEMA

REPORT_SCHEMA = "rifscope.report.v1"

__all__ = [
    "POLY_SCHEMA", "RIF_SCHEMA", "PORTRAIT_SCHEMA", "REPORT_SCHEMA", "VERIFY_SCHEMA",
    "validate_poly", "validate_rif", "validate_report", "validate_verify", "document_kind",
]


def _check_schema(doc, expected: str, optional: bool = False) -> None:
    if not isinstance(doc, dict):
        raise ValueError(f"Expected a JSON object for {expected}, got {type(doc).__name__}.")
    found = doc.get("schema")
    if found is None and optional:
        return
    if found != expected:
        raise ValueError(
            f"Expected schema '{expected}', got {found!r}. "
            f'Set {{"schema": "{expected}"}} or drop the field.'
        )


def validate_poly(doc: dict) -> None:
    """Raise ValueError if the polynomial document is malformed."""
    _check_schema(doc, POLY_SCHEMA, optional=True)
    for key in ("bidegree", "coeffs"):
        if key not in doc:
            raise ValueError(f"Polynomial JSON must contain '{key}'.")
    bideg = doc["bidegree"]
    if not (isinstance(bideg, list) and len(bideg) == 2 and all(isinstance(d, int) and d >= 0 for d in bideg)):
        raise ValueError(f"'bidegree' must be [m, n] with non-negative integers, got {bideg!r}.")
    rows = doc["coeffs"]
    if not isinstance(rows, list) or len(rows) != bideg[0] + 1:
        raise ValueError(f"'coeffs' must have {bideg[0] + 1} rows for bidegree {bideg}.")
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != bideg[1] + 1:
            raise ValueError(f"'coeffs' row {i} must have {bideg[1] + 1} entries.")
        for entry in row:
            if not (isinstance(entry, list) and len(entry) == 2
                    and all(isinstance(v, (int, float)) for v in entry)):
                raise ValueError(f"Coefficients are [re, im] pairs, got {entry!r} in row {i}.")


def validate_rif(doc: dict) -> None:
    """Raise ValueError if the Rif document is malformed."""
    _check_schema(doc, RIF_SCHEMA, optional=True)
    if "p" not in doc:
        raise ValueError("Rif JSON must contain 'p' (the denominator polynomial).")
    validate_poly(doc["p"])
    eta = doc.get("eta", [-1.0, 0.0])
    if not (isinstance(eta, list) and len(eta) == 2):
        raise ValueError(f"'eta' must be [re, im], got {eta!r}.")
    monomial = doc.get("monomial", [0, 0])
    if not (isinstance(monomial, list) and len(monomial) == 2
            and all(isinstance(k, int) and k >= 0 for k in monomial)):
        raise ValueError(f"'monomial' must be [M, N] with non-negative integers, got {monomial!r}.")


def validate_report(doc: dict) -> None:
    _check_schema(doc, REPORT_SCHEMA)
    for key in ("rif_id", "header", "singular_points", "identity_checks"):
        if key not in doc:
            raise ValueError(f"Analysis report must contain '{key}'.")
    if not isinstance(doc["singular_points"], list):
        raise ValueError("'singular_points' must be a list.")


def validate_verify(doc: dict) -> None:
    _check_schema(doc, VERIFY_SCHEMA)
    if "results" not in doc or not isinstance(doc["results"], list):
        raise ValueError("Verify output must contain a 'results' list.")


def document_kind(doc: dict) -> str:
    """'rif' or 'poly' for an input document, by schema or by shape."""
    schema = doc.get("schema") if isinstance(doc, dict) else None
    if schema == RIF_SCHEMA or (schema is None and isinstance(doc, dict) and "p" in doc):
        validate_rif(doc)
        return "rif"
    if schema == POLY_SCHEMA or (schema is None and isinstance(doc, dict) and "coeffs" in doc):
        validate_poly(doc)
        return "poly"
    raise ValueError(
        f"Unrecognised input document (schema {schema!r}).  Expected a Rif "
        '({"p": {...}, "eta": [re, im]}) or a polynomial ({"bidegree": [m, n], "coeffs": ...}).'
    )
