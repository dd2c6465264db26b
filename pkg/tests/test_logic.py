import numpy as np
import pytest

from bbstl.errors import (
    EmptyInterval,
    FormulaSyntaxError,
    NegativeBound,
    TimeOutOfValidDomain,
)
from bbstl.logic import (
    And,
    Atom,
    Hist,
    Interval,
    Not,
    Once,
    Or,
    Since,
    TrueFormula,
    boolean_sat,
    boolean_signal,
    format_formula,
    parse_formula,
    validate,
)
from bbstl.signals import Signal

from conftest import DT


class TestParser:
    def test_hist_example(self):
        assert parse_formula("hist[1,1.2] p") == \
            Hist(Interval(1.0, 1.2), Atom("p"))

    def test_nested_conjunction_example(self):
        phi = parse_formula("a and once[0,0.3](b and once[0,0.3] c)")
        expected = And(
            Atom("a"),
            Once(Interval(0.0, 0.3),
                 And(Atom("b"), Once(Interval(0.0, 0.3), Atom("c")))))
        assert phi == expected

    def test_empty_interval_rejected(self):
        with pytest.raises(EmptyInterval):
            parse_formula("once[0.4,0.2] p")

    def test_negative_bound_rejected(self):
        with pytest.raises(NegativeBound):
            parse_formula("once[-0.5,1] p")

    def test_precedence(self):
        assert parse_formula("a or b and c") == \
            Or(Atom("a"), And(Atom("b"), Atom("c")))
        assert parse_formula("not a and b") == And(Not(Atom("a")), Atom("b"))
        assert parse_formula("once[0,1] a and b") == \
            And(Once(Interval(0, 1), Atom("a")), Atom("b"))

    def test_since_operands_are_primaries(self):
        phi = parse_formula("a since[0,1] b and c")
        assert phi == And(Since(Interval(0, 1), Atom("a"), Atom("b")),
                          Atom("c"))

    def test_true_literal(self):
        assert parse_formula("true or p") == Or(TrueFormula(), Atom("p"))

    def test_syntax_error_carries_position(self):
        with pytest.raises(FormulaSyntaxError) as err:
            parse_formula("once[0,1] and p")
        assert err.value.position >= 0

    @pytest.mark.parametrize("text", [
        "once p", "hist[0,1", "(a or b", "a b", "a and", "since[0,1] p", ""])
    def test_malformed_inputs(self, text):
        with pytest.raises(FormulaSyntaxError):
            parse_formula(text)

    def test_keywords_not_atoms(self):
        with pytest.raises(FormulaSyntaxError):
            parse_formula("not not not once")


def random_formula(rng, depth=0):
    pick = rng.integers(0, 8 if depth < 3 else 2)
    if pick == 0:
        return Atom(rng.choice(["p", "q", "g"]))
    if pick == 1:
        return TrueFormula()
    lo = round(float(rng.uniform(0, 0.5)), 3)
    hi = round(lo + float(rng.uniform(0, 0.5)), 3)
    if pick == 2:
        return Not(random_formula(rng, depth + 1))
    if pick == 3:
        return And(random_formula(rng, depth + 1), random_formula(rng, depth + 1))
    if pick == 4:
        return Or(random_formula(rng, depth + 1), random_formula(rng, depth + 1))
    if pick == 5:
        return Once(Interval(lo, hi), random_formula(rng, depth + 1))
    if pick == 6:
        return Hist(Interval(lo, hi), random_formula(rng, depth + 1))
    return Since(Interval(lo, hi), random_formula(rng, depth + 1),
                 random_formula(rng, depth + 1))


class TestRoundtrip:
    def test_parse_format_roundtrip(self):
        rng = np.random.default_rng(2024)
        for _ in range(200):
            phi = random_formula(rng)
            assert parse_formula(format_formula(phi)) == phi


class TestValidate:
    def test_clean_formula(self, kernel_table):
        phi = parse_formula("hist[1,1.2] g")
        assert validate(phi, kernel_table) == []

    def test_unknown_atom(self, kernel_table):
        diags = validate(parse_formula("missing"), kernel_table)
        assert [d.code for d in diags] == ["UnknownAtom"]
        assert diags[0].severity == "error"

    def test_since_warning(self, kernel_table):
        diags = validate(parse_formula("p since[0,1] q"), kernel_table)
        assert [d.code for d in diags] == ["SinceNotGfrfSupported"]
        assert diags[0].severity == "warning"

    def test_true_warning(self, kernel_table):
        diags = validate(parse_formula("p or true"), kernel_table)
        assert [d.code for d in diags] == ["TrueNotApproximable"]


class TestBooleanSat:
    def test_true_everywhere(self, kernel_table):
        x = Signal(0.0, DT, np.full(2001, -3.0))
        assert boolean_sat(TrueFormula(), x, 1.0, kernel_table) is True

    def test_negative_constant_fails_atom(self, kernel_table):
        x = Signal(0.0, DT, np.full(2001, -1.0))
        assert boolean_sat(Atom("g"), x, 2.0, kernel_table) is False
        assert boolean_sat(Not(Atom("g")), x, 2.0, kernel_table) is True

    def test_once_window_overlaps_pulse(self, kernel_table):
        # pulse positive only on [0.5, 0.6]; once[0.2,0.4] at t=0.85 sees
        # the window [0.45, 0.65] which overlaps the pulse
        n = 1001
        t = DT * np.arange(n)
        x = np.full(n, -0.5)
        x[(t >= 0.5) & (t <= 0.6)] = 1.0
        sig = Signal(0.0, DT, x)
        phi = Once(Interval(0.2, 0.4), Atom("g"))
        assert boolean_sat(phi, sig, 0.85, kernel_table) is True
        assert boolean_sat(phi, sig, 1.6, kernel_table) is False
        # brute-force oracle over the window grid
        inner = boolean_signal(Atom("g"), sig, kernel_table)
        k85 = inner.times
        window = (k85 >= 0.45 - 1e-9) & (k85 <= 0.65 + 1e-9)
        assert bool(inner.samples[window].max() >= 0.5) is True

    def test_out_of_domain_time(self, kernel_table):
        x = Signal(0.0, DT, np.ones(501))
        with pytest.raises(TimeOutOfValidDomain):
            boolean_sat(Atom("g"), x, 0.05, kernel_table)

    def test_negation_involution_away_from_ties(self, kernel_table):
        rng = np.random.default_rng(5)
        x = Signal(0.0, DT, rng.normal(size=1500))
        base = boolean_signal(Atom("g"), x, kernel_table)
        neg = boolean_signal(Not(Atom("g")), x, kernel_table)
        from bbstl.signals import correlate
        meas = correlate(kernel_table["g"], x)
        away = np.abs(meas.samples) > 1e-12
        assert np.array_equal(base.samples[away] >= 0.5,
                              neg.samples[away] < 0.5)
