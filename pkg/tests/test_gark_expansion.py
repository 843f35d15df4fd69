"""Tests for the GARK expansion and the colored tree oracle."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from mri_gark.gark_expansion import (
    FAST_BY_ORDER,
    FAST_METHODS,
    colored_trees,
    check_gark_order,
    expand,
    fast_method,
    tree_counts,
    tree_density,
    tree_order,
    tree_signature,
    trees_of_order,
)
from mri_gark.order_conditions import all_passed
from mri_gark.tableaux import builtin

F = Fraction


class TestFastMethods:
    @pytest.mark.parametrize("name", sorted(FAST_METHODS))
    def test_tableaux_consistent(self, name):
        fast = fast_method(name)
        assert fast.violations() == []
        assert fast.explicit

    def test_by_order_table(self):
        assert {n: FAST_METHODS[name].order for n, name in FAST_BY_ORDER.items()} == {
            1: 1, 2: 2, 3: 3, 4: 4,
        }

    def test_unknown_fast_method(self):
        with pytest.raises(ValueError, match="Unknown fast method"):
            fast_method("dopri5")


class TestTrees:
    def test_counts_by_order(self):
        assert tree_counts(4) == {1: 2, 2: 4, 3: 14, 4: 52}

    def test_order_one(self):
        assert [tree_signature(t) for t in colored_trees(1)] == ["f", "s"]

    def test_order_two_signatures(self):
        sigs = {tree_signature(t) for t in trees_of_order(2)}
        assert sigs == {"f[f]", "f[s]", "s[f]", "s[s]"}

    def test_colored_trees_cumulative(self):
        assert len(colored_trees(3)) == 2 + 4 + 14
        assert len(colored_trees(4)) == 72

    def test_no_duplicates(self):
        trees = colored_trees(4)
        assert len(set(trees)) == len(trees)
        assert len({tree_signature(t) for t in trees}) == len(trees)

    def test_density(self):
        bushy = ("f", (("s", ()), ("s", ()), ("s", ())))
        chain = ("s", (("f", (("f", (("s", ()),)),)),))
        assert tree_order(bushy) == 4
        assert tree_density(bushy) == 4
        assert tree_density(chain) == 24

    def test_order_out_of_range(self):
        with pytest.raises(ValueError, match="1..4"):
            colored_trees(5)
        with pytest.raises(ValueError):
            trees_of_order(0)


class TestExpand:
    def test_dimensions(self):
        tab = expand(builtin("mri-erk22a"), fast_method("rk4"))
        assert tab.Aff.shape == (8, 8)
        assert tab.Afs.shape == (8, 2)
        assert tab.Asf.shape == (2, 8)
        assert tab.Ass.shape == (2, 2)

    def test_slow_block_from_integrated_coupling(self):
        tab = expand(builtin("mri-erk22a"), fast_method("rk4"))
        assert tab.Ass.tolist() == [[0, 0], [F(1, 2), 0]]

    @pytest.mark.parametrize("name", ["mri-erk33a", "mri-irk21a", "mri-esdirk46a"])
    def test_fast_weights(self, name):
        method = builtin(name)
        tab = expand(method, fast_method("kutta3"))
        assert sum(tab.bf) == 1
        assert tab.bf.dot(tab.cff) == F(1, 2)
        expected = np.concatenate([fast_method("kutta3").b * d for d in method.base.dc])
        assert (tab.bf == expected).all()

    @pytest.mark.parametrize("name", ["mri-erk45a", "mri-esdirk46a"])
    def test_abscissae(self, name):
        method = builtin(name)
        fast = fast_method("rk4")
        tab = expand(method, fast)
        sf = fast.stages
        for i in range(method.stages):
            for ell in range(sf):
                assert tab.cff[i * sf + ell] == method.base.c[i] + method.base.dc[i] * fast.c[ell]
        assert (tab.csf == method.base.c).all()
        assert (tab.css == method.base.c).all()

    def test_slow_weights_match_base(self):
        method = builtin("mri-erk45a")
        tab = expand(method, fast_method("rk38"))
        assert (tab.bs == method.base.b).all()

    def test_rejects_inconsistent_fast(self):
        bad = fast_method("rk4")
        broken = type(bad)("bad", bad.A, bad.b * 2, bad.c, 4)
        with pytest.raises(ValueError, match="weights"):
            expand(builtin("mri-erk22a"), broken)


class TestTreeOracle:
    def test_erk45a_order4(self):
        tab = expand(builtin("mri-erk45a"), fast_method("rk4"))
        reports = check_gark_order(tab, 4)
        assert len(reports) == 72
        assert all_passed(reports)

    def test_erk22a_order2_not_3(self):
        tab = expand(builtin("mri-erk22a"), fast_method("rk4"))
        assert all_passed(check_gark_order(tab, 2))
        assert not all_passed(check_gark_order(tab, 3))

    def test_report_ids_carry_signatures(self):
        tab = expand(builtin("mri-erk22a"), fast_method("midpoint"))
        ids = [r.condition_id for r in check_gark_order(tab, 2)]
        assert ids[:2] == ["tree.f", "tree.s"]
        assert "tree.s[f]" in ids

    def test_exact_mode(self):
        tab = expand(builtin("mri-erk33a"), fast_method("kutta3"))
        reports = check_gark_order(tab, 3, tol=0.0, exact=True)
        assert all(r.passed and r.residual == 0.0 for r in reports)

    @pytest.mark.parametrize("name,p", [
        ("mri-erk22b", 2),
        ("mri-erk33a", 3),
        ("mri-irk21a", 2),
        ("mri-esdirk34a", 3),
        ("mri-sdirk33a", 3),
        ("mri-esdirk46a", 4),
    ])
    @pytest.mark.parametrize("fast", ["rk4", "rk38"])
    def test_agrees_with_coupling_conditions(self, name, p, fast):
        tab = expand(builtin(name), fast_method(fast))
        assert all_passed(check_gark_order(tab, p))

    @pytest.mark.parametrize("name,p,fast", [
        ("mri-erk22a", 2, "kutta3"), ("mri-erk22a", 2, "rk4"),
        ("mri-erk22b", 2, "kutta3"), ("mri-erk22b", 2, "rk4"),
        ("mri-irk21a", 2, "kutta3"), ("mri-irk21a", 2, "rk4"),
        ("mri-erk33a", 3, "rk4"), ("mri-erk33a", 3, "rk38"),
        ("mri-esdirk34a", 3, "rk4"), ("mri-esdirk34a", 3, "rk38"),
        ("mri-sdirk33a", 3, "rk4"), ("mri-sdirk33a", 3, "rk38"),
    ])
    def test_next_order_tree_fails(self, name, p, fast):
        tab = expand(builtin(name), fast_method(fast))
        lower = {r.condition_id for r in check_gark_order(tab, p)}
        failed = [r.condition_id for r in check_gark_order(tab, p + 1) if not r.passed]
        assert failed
        assert not lower.intersection(failed)
