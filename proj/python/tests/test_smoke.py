import csv
import io
import math

import pytest

import slatefem


def test_mesh_counts():
    assert slatefem.mesh_counts(4) == {"vertices": 25, "cells": 32, "facets": 56}


def test_convergence_rates_mixed():
    rows, text = slatefem.run_convergence("mixed-hybrid", 1, sizes=[4, 8, 16])
    assert len(rows) == 3
    assert all(r["error"] == "" for r in rows)
    assert abs(rows[-1]["rate_p"] - 1.0) < 0.2
    assert abs(rows[-1]["rate_pstar"] - 2.0) < 0.3
    parsed = list(csv.DictReader(io.StringIO(text)))
    assert [int(r["n"]) for r in parsed] == [4, 8, 16]
    assert math.isclose(float(parsed[-1]["err_p"]), rows[-1]["err_p"], rel_tol=1e-11)


def test_ldgh_flux_columns():
    rows, _ = slatefem.run_convergence("ldgh", 1, sizes=[4, 8], options={"condensed_field_pc_type": "exact"})
    assert rows[-1]["err_div_ustar"] < rows[0]["err_div_ustar"]
    assert rows[-1]["rate_div_ustar"] > 1.5


def test_compare_single_iteration():
    rows = slatefem.run_compare("mixed-hybrid", 1, sizes=[2, 4], options={"condensed_field_pc_type": "exact"})
    paths = {r["path"] for r in rows}
    assert paths == {"direct", "hybridization", "scpc"}
    for r in rows:
        if r["path"] != "direct":
            assert r["outer_iterations"] == 1
            assert r["max_diff"] < 1e-8


def test_bad_input_raises():
    with pytest.raises(ValueError):
        slatefem.run_convergence("mixed-hybrid", 1, sizes=[4])
    with pytest.raises(ValueError):
        slatefem.run_convergence("nonsense", 1)
