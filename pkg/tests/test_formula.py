"""Formula grammar: parsing, option handling, round-trip printing, errors."""

import pytest

from lapgm import parse_formula
from lapgm.errors import FormulaError
from lapgm.formula import ComponentSpec, HyperOption, format_formula


class TestBasicGrammar:
    def test_intercept_covariate_component(self):
        spec = parse_formula("y ~ 1 + w + f(idx, model=iid)")
        assert spec.response == "y"
        assert spec.intercept is True
        assert spec.covariates == ["w"]
        assert len(spec.components) == 1
        comp = spec.components[0]
        assert comp.name == "idx"
        assert comp.kind == "iid"

    def test_quoted_model_kind_equivalent(self):
        a = parse_formula("y ~ 1 + w + f(idx, model=iid)")
        b = parse_formula('y ~ 1 + w + f(idx, model="iid")')
        assert a == b

    def test_no_intercept(self):
        spec = parse_formula("y ~ -1 + x1")
        assert spec.intercept is False
        assert spec.covariates == ["x1"]
        assert spec.components == []

    def test_intercept_default_when_unstated(self):
        # A bare covariate list keeps the intercept, like R formulas.
        spec = parse_formula("y ~ w")
        assert spec.intercept is True

    def test_multiple_covariates_and_components(self):
        spec = parse_formula("y ~ 1 + a + b + f(g1, model=iid) + f(g2, model=ar1)")
        assert spec.covariates == ["a", "b"]
        assert [c.name for c in spec.components] == ["g1", "g2"]
        assert [c.kind for c in spec.components] == ["iid", "ar1"]

    def test_component_defaults_to_iid(self):
        spec = parse_formula("y ~ 1 + f(idx)")
        assert spec.components[0].kind == "iid"

    def test_unknown_model_kind(self):
        with pytest.raises(FormulaError, match="unknown component kind 'ar9'"):
            parse_formula("y ~ 1 + f(t, model=ar9)")

    def test_whitespace_insensitive(self):
        a = parse_formula("y~1+w+f(idx,model=iid)")
        b = parse_formula("y ~ 1 + w + f( idx , model = iid )")
        assert a == b


class TestOptions:
    def test_n_declared(self):
        spec = parse_formula("y ~ 1 + f(idx, model=iid, n=25)")
        assert spec.components[0].n == 25

    def test_n_must_be_positive_integer(self):
        with pytest.raises(FormulaError, match="positive integer"):
            parse_formula("y ~ 1 + f(idx, n=2.5)")
        with pytest.raises(FormulaError, match="positive integer"):
            parse_formula("y ~ 1 + f(idx, n=0)")

    def test_scale_model_flag(self):
        spec = parse_formula("y ~ -1 + f(t, model=rw2, scale.model=TRUE)")
        assert spec.components[0].scale_model is True

    def test_rw2_gets_sum_to_zero_constraint_by_default(self):
        spec = parse_formula("y ~ 1 + f(t, model=rw2)")
        assert spec.components[0].constr is True

    def test_rw2_constraint_can_be_disabled(self):
        spec = parse_formula("y ~ 1 + f(t, model=rw2, constr=FALSE)")
        assert spec.components[0].constr is False

    def test_iid_has_no_implicit_constraint(self):
        spec = parse_formula("y ~ 1 + f(idx, model=iid)")
        assert spec.components[0].constr is None

    def test_hyper_prior_and_param(self):
        spec = parse_formula(
            'y ~ 1 + f(idx, model=iid, hyper.prec.prior="pc.prec",'
            " hyper.prec.param=c(1, 0.01))"
        )
        opt = spec.components[0].hyper["prec"]
        assert opt.prior == "pc.prec"
        assert opt.param == (1.0, 0.01)

    def test_hyper_scalar_param_becomes_tuple(self):
        spec = parse_formula("y ~ 1 + f(idx, hyper.prec.param=0.5)")
        assert spec.components[0].hyper["prec"].param == (0.5,)

    def test_hyper_fixed_and_initial(self):
        spec = parse_formula(
            "y ~ 1 + f(t, model=ar1, hyper.rho.fixed=TRUE, hyper.rho.initial=1.5)"
        )
        opt = spec.components[0].hyper["rho"]
        assert opt.fixed is True
        assert opt.initial == 1.5

    def test_negative_initial(self):
        spec = parse_formula("y ~ 1 + f(idx, hyper.prec.initial=-2)")
        assert spec.components[0].hyper["prec"].initial == -2.0

    def test_unknown_option_key(self):
        with pytest.raises(FormulaError, match="unknown option key 'order'"):
            parse_formula("y ~ 1 + f(idx, order=2)")

    def test_unknown_hyper_field(self):
        with pytest.raises(FormulaError, match="unknown option key"):
            parse_formula("y ~ 1 + f(idx, hyper.prec.scale=1)")

    def test_c_tuple_rejects_strings(self):
        with pytest.raises(FormulaError, match="numbers only"):
            parse_formula('y ~ 1 + f(idx, hyper.prec.param=c(1, "a"))')

    def test_hyper_option_resolved_prior_falls_back(self):
        opt = HyperOption(param=(2.0, 0.2))
        from lapgm.priors import PriorSpec

        resolved = opt.resolved_prior(PriorSpec("gamma", (1.0, 5e-5)))
        assert resolved.family == "gamma"
        assert resolved.params == (2.0, 0.2)

    def test_component_spec_hyper_option_default(self):
        comp = ComponentSpec(name="idx")
        assert comp.hyper_option("prec") == HyperOption()


class TestErrors:
    def test_missing_tilde(self):
        with pytest.raises(FormulaError, match="expected 'response ~ terms'"):
            parse_formula("y + w")

    def test_non_string_input(self):
        with pytest.raises(FormulaError):
            parse_formula(None)

    def test_error_reports_column(self):
        with pytest.raises(FormulaError, match="at column 5"):
            parse_formula("y ~ ~ w")

    def test_unexpected_character_column(self):
        with pytest.raises(FormulaError, match="unexpected character '!' at column 7"):
            parse_formula("y ~ w ! z")

    def test_duplicate_covariate(self):
        with pytest.raises(FormulaError, match="duplicate term 'w'"):
            parse_formula("y ~ 1 + w + w")

    def test_duplicate_component(self):
        with pytest.raises(FormulaError, match="duplicate term 'idx'"):
            parse_formula("y ~ f(idx) + f(idx, model=ar1)")

    def test_duplicate_intercept(self):
        with pytest.raises(FormulaError, match="duplicate intercept"):
            parse_formula("y ~ 1 + 1 + w")

    def test_conflicting_intercept(self):
        with pytest.raises(FormulaError, match="duplicate intercept"):
            parse_formula("y ~ 1 + -1")

    def test_only_minus_one_subtracted(self):
        with pytest.raises(FormulaError, match="only '-1' may be subtracted"):
            parse_formula("y ~ -2 + w")

    def test_trailing_garbage(self):
        with pytest.raises(FormulaError, match="unexpected"):
            parse_formula("y ~ w z")

    def test_unclosed_component(self):
        with pytest.raises(FormulaError):
            parse_formula("y ~ 1 + f(idx, model=iid")

    def test_model_requires_kind_name(self):
        with pytest.raises(FormulaError, match="component kind"):
            parse_formula("y ~ 1 + f(idx, model=3)")


ROUND_TRIP_CASES = [
    "y ~ 1 + w + f(idx, model=iid)",
    "y ~ -1 + x1",
    "y ~ 1 + f(t, model=ar1, hyper.rho.initial=0.5)",
    "y ~ -1 + f(t, model=rw2, scale.model=TRUE, constr=FALSE)",
    'y ~ 1 + a + b + f(g, model=iid, hyper.prec.prior="pc.prec",'
    " hyper.prec.param=c(1, 0.01), hyper.prec.fixed=TRUE)",
    "y ~ 1 + f(g1, model=iid, n=12) + f(g2, model=ar1, hyper.prec.param=0.5)",
]


@pytest.mark.parametrize("text", ROUND_TRIP_CASES)
def test_format_round_trip(text):
    spec = parse_formula(text)
    printed = format_formula(spec)
    assert parse_formula(printed) == spec
