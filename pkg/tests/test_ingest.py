import math
import warnings

import numpy as np
import pytest

from incomedist import (
    ConversionResult,
    IncomeSample,
    ParseError,
    PreconditionError,
    Source,
    WealthRecord,
    find_scale_factor,
    incomes_from_wealth,
    load_samples,
    merge,
)
from incomedist.fileformats import write_samples_csv
from incomedist.ingest import gap_score


def ladder(n_s=1000, n_r=40, x_m=1e3, cut=2e5, mult=100.0):
    """One geometric ladder split at the cut; the upper segment ships
    pre-multiplied, mimicking a wealth-proxy unit mismatch."""
    step = (np.log(cut) - np.log(x_m)) / (n_s - 1)
    survey = np.geomspace(x_m, cut, n_s)
    rich = cut * np.exp(step * np.arange(1, n_r + 1)) * mult
    return survey, rich


class TestWealthRecord:
    def test_fields(self):
        r = WealthRecord("smith", {2006: 3.0e9, 2007: 4.5e9}, "USD")
        assert r.entity_id == "smith"
        assert r.wealth_by_year[2007] == 4.5e9
        assert r.currency == "USD"

    def test_currency_default(self):
        assert WealthRecord("a", {2006: 1.0, 2007: 2.0}).currency == "EUR"

    def test_empty_id_rejected(self):
        with pytest.raises(PreconditionError):
            WealthRecord("", {2006: 1.0, 2007: 2.0})

    def test_single_year_rejected(self):
        with pytest.raises(PreconditionError, match="two years"):
            WealthRecord("a", {2006: 1.0})

    def test_nonpositive_wealth_rejected(self):
        with pytest.raises(PreconditionError):
            WealthRecord("a", {2006: 0.0, 2007: 2.0})
        with pytest.raises(PreconditionError):
            WealthRecord("a", {2006: 1.0, 2007: -2.0})

    def test_non_integer_year_rejected(self):
        with pytest.raises(PreconditionError):
            WealthRecord("a", {"2006": 1.0, 2007: 2.0})

    def test_frozen(self):
        r = WealthRecord("a", {2006: 1.0, 2007: 2.0})
        with pytest.raises(AttributeError):
            r.entity_id = "b"


class TestIncomesFromWealth:
    def test_difference_times_fx(self):
        rec = WealthRecord("a", {2006: 4.0, 2007: 6.0})
        out = incomes_from_wealth([rec], 2006, 2007, fx=0.75)
        assert isinstance(out, ConversionResult)
        (s,) = out.samples
        assert s.income == pytest.approx(1.5, rel=1e-15)
        assert s.year == 2007
        assert s.source is Source.RICHLIST
        assert out.n_dropped_nonpositive == 0
        assert out.n_skipped_missing_year == 0

    def test_nonpositive_difference_dropped_and_counted(self):
        recs = [
            WealthRecord("up", {2006: 1.0, 2007: 3.0}),
            WealthRecord("down", {2006: 3.0, 2007: 1.0}),
            WealthRecord("flat", {2006: 2.0, 2007: 2.0}),
        ]
        out = incomes_from_wealth(recs, 2006, 2007, fx=1.0)
        assert [s.income for s in out.samples] == [2.0]
        assert out.n_dropped_nonpositive == 2

    def test_missing_year_skipped_with_warning(self):
        recs = [
            WealthRecord("ok", {2006: 1.0, 2007: 5.0}),
            WealthRecord("gap", {2005: 1.0, 2007: 5.0}),
        ]
        with pytest.warns(UserWarning, match="gap"):
            out = incomes_from_wealth(recs, 2006, 2007, fx=1.0)
        assert len(out.samples) == 1
        assert out.n_skipped_missing_year == 1

    def test_fx_must_be_positive(self):
        rec = WealthRecord("a", {2006: 1.0, 2007: 2.0})
        with pytest.raises(PreconditionError):
            incomes_from_wealth([rec], 2006, 2007, fx=0.0)


class TestGapScore:
    def test_known_gap(self):
        # N=10 -> top decile holds max(2, 1) = 2 points: 9 and 1000
        # oracle: ln(1000/9) = 4.710530701645918
        x = np.array([1.0, 2, 3, 4, 5, 6, 7, 8, 9, 1000])
        assert gap_score(x) == pytest.approx(4.710530701645918, rel=1e-15)

    def test_order_free(self):
        x = np.array([1.0, 2, 3, 4, 5, 6, 7, 8, 9, 1000])
        rng = np.random.default_rng(0)
        shuffled = rng.permutation(x)
        assert gap_score(shuffled) == gap_score(x)

    def test_geometric_ladder_gap_is_step(self):
        x = np.geomspace(1.0, 1e4, 41)
        step = np.log(1e4) / 40
        assert gap_score(x) == pytest.approx(step, rel=1e-12)

    def test_positive_required(self):
        with pytest.raises(PreconditionError):
            gap_score(np.array([0.0, 1.0, 2.0]))

    def test_two_points(self):
        assert gap_score(np.array([2.0, 8.0])) == pytest.approx(math.log(4.0))


class TestFindScaleFactor:
    def test_ladder_recovery(self):
        survey, rich = ladder()
        f = find_scale_factor(survey, rich)
        assert f == pytest.approx(0.01, rel=1e-9)

    def test_recovered_factor_is_argmin_locally(self):
        survey, rich = ladder()
        f = find_scale_factor(survey, rich)
        gf = gap_score(np.concatenate([survey, rich * f]))
        assert gf <= gap_score(np.concatenate([survey, rich * 2 * f]))
        assert gf <= gap_score(np.concatenate([survey, rich * f / 2]))

    def test_gap_shrinks(self):
        survey, rich = ladder()
        f = find_scale_factor(survey, rich)
        g1 = gap_score(np.concatenate([survey, rich]))
        gf = gap_score(np.concatenate([survey, rich * f]))
        assert g1 / gf > 100

    def test_no_gap_returns_one(self):
        # survey max >= rich min: nothing to close
        assert find_scale_factor([1.0, 2.0, 3.0], [2.5, 4.0]) == 1.0

    def test_empty_inputs_rejected(self):
        with pytest.raises(PreconditionError):
            find_scale_factor([], [1.0])
        with pytest.raises(PreconditionError):
            find_scale_factor([1.0], [])

    def test_nonpositive_rejected(self):
        with pytest.raises(PreconditionError):
            find_scale_factor([1.0, -2.0], [5.0, 6.0])

    def test_common_rescale_invariance(self):
        # the objective is a log-gap, so a common currency change must not
        # move the recovered factor
        survey, rich = ladder()
        f = find_scale_factor(survey, rich)
        fc = find_scale_factor(survey * 3.7, rich * 3.7)
        assert fc == pytest.approx(f, rel=1e-9)

    def test_accepts_income_samples(self):
        survey, rich = ladder(n_s=120, n_r=6)
        wrapped_s = [IncomeSample(income=v) for v in survey]
        wrapped_r = [IncomeSample(income=v, source=Source.RICHLIST) for v in rich]
        assert find_scale_factor(wrapped_s, wrapped_r) == find_scale_factor(survey, rich)


class TestMerge:
    def survey(self):
        return [IncomeSample(income=v, source=Source.SURVEY, year=2007)
                for v in (1e3, 5e3, 2e4)]

    def rich(self):
        return [IncomeSample(income=v, source=Source.RICHLIST, year=2007)
                for v in (4e6, 9e6)]

    def test_scaling_and_provenance(self):
        merged, report = merge(self.survey(), self.rich(), 0.01,
                               n_richlist_dropped_nonpositive=3,
                               exchange_rate_used=0.75)
        assert [s.income for s in merged] == [1e3, 5e3, 2e4, 4e4, 9e4]
        assert [s.source for s in merged[:3]] == [Source.SURVEY] * 3
        assert [s.source for s in merged[3:]] == [Source.RICHLIST] * 2
        assert all(s.year == 2007 for s in merged)
        assert report.scale_factor == 0.01
        assert report.n_survey == 3
        assert report.n_richlist_kept == 2
        assert report.n_richlist_dropped_nonpositive == 3
        assert report.exchange_rate_used == 0.75

    def test_overlap_window(self):
        _, report = merge(self.survey(), self.rich(), 0.01)
        assert report.overlap_window == (4e4, 2e4)

    def test_empty_richlist(self):
        merged, report = merge(self.survey(), [], 1.0)
        assert [s.income for s in merged] == [1e3, 5e3, 2e4]
        assert report.n_richlist_kept == 0
        assert all(math.isnan(v) for v in report.overlap_window)

    def test_factor_must_be_positive(self):
        with pytest.raises(PreconditionError):
            merge(self.survey(), self.rich(), 0.0)

    def test_inputs_not_mutated(self):
        s, r = self.survey(), self.rich()
        merge(s, r, 0.5)
        assert [x.income for x in r] == [4e6, 9e6]


class TestLoadSamplesSurvey:
    def write(self, tmp_path, text, name="s.csv"):
        p = tmp_path / name
        p.write_text(text)
        return p

    def test_basic_rows(self, tmp_path):
        p = self.write(tmp_path, "income,source,year\n1000.5,survey,2007\n2e4,richlist,2006\n")
        res = load_samples(p, {"kind": "survey"})
        assert res.kind == "survey"
        assert res.n_rows == 2
        assert res.errors == []
        a, b = res.samples
        assert (a.income, a.source, a.year) == (1000.5, Source.SURVEY, 2007)
        assert (b.income, b.source, b.year) == (2e4, Source.RICHLIST, 2006)

    def test_empty_file(self, tmp_path):
        p = self.write(tmp_path, "")
        res = load_samples(p, {"kind": "survey"})
        assert res.samples == [] and res.n_rows == 0 and res.errors == []

    def test_tab_delimiter_sniffed(self, tmp_path):
        p = self.write(tmp_path, "income\tyear\n150\t2007\n")
        res = load_samples(p, {"kind": "survey"})
        assert res.samples[0].income == 150.0

    def test_malformed_rows_carry_line_numbers(self, tmp_path):
        body = "\n".join(f"{100 + i}" for i in range(99))
        p = self.write(tmp_path, "income\n" + body + "\nnot-a-number\n")
        res = load_samples(p, {"kind": "survey"})
        assert len(res.samples) == 99
        assert len(res.errors) == 1
        lineno, msg = res.errors[0]
        assert lineno == 101
        assert "not-a-number" in msg or "could not convert" in msg

    def test_negative_income_is_malformed(self, tmp_path):
        body = "\n".join(f"{100 + i}" for i in range(99))
        p = self.write(tmp_path, "income\n" + body + "\n-5\n")
        res = load_samples(p, {"kind": "survey"})
        assert len(res.errors) == 1

    def test_too_many_malformed_aborts(self, tmp_path):
        p = self.write(tmp_path, "income\n100\nbad\nworse\n200\n")
        with pytest.raises(ParseError, match="line 3"):
            load_samples(p, {"kind": "survey"})

    def test_malformed_fraction_override(self, tmp_path):
        p = self.write(tmp_path, "income\n100\nbad\nworse\n200\n")
        res = load_samples(p, {"kind": "survey", "max_malformed_fraction": "0.5"})
        assert len(res.samples) == 2 and len(res.errors) == 2

    def test_missing_column_rejected(self, tmp_path):
        p = self.write(tmp_path, "wage,year\n100,2007\n")
        with pytest.raises(ParseError, match="income"):
            load_samples(p, {"kind": "survey"})

    def test_income_column_override(self, tmp_path):
        p = self.write(tmp_path, "wage,year\n100,2007\n")
        res = load_samples(p, {"kind": "survey", "income_column": "wage"})
        assert res.samples[0].income == 100.0

    def test_unknown_kind_rejected(self, tmp_path):
        p = self.write(tmp_path, "income\n100\n")
        with pytest.raises(ParseError, match="kind"):
            load_samples(p, {"kind": "census"})

    def test_write_then_load_is_bit_exact(self, tmp_path):
        rng = np.random.default_rng(3)
        incomes = 1e3 * np.exp(rng.standard_normal(200))
        samples = [IncomeSample(income=float(v)) for v in incomes]
        p = tmp_path / "round.csv"
        write_samples_csv(p, samples)
        back = load_samples(p, {"kind": "survey"})
        assert [s.income for s in back.samples] == [s.income for s in samples]


class TestLoadSamplesWealth:
    TEXT = (
        "id,year,wealth,currency\n"
        "alpha,2006,3e9,EUR\n"
        "alpha,2007,4e9,EUR\n"
        "beta,2006,1e9,EUR\n"
        "beta,2007,2e9,EUR\n"
    )

    def test_grouping(self, tmp_path):
        p = tmp_path / "w.csv"
        p.write_text(self.TEXT)
        res = load_samples(p, {"kind": "wealth"})
        assert res.kind == "wealth"
        assert {r.entity_id for r in res.records} == {"alpha", "beta"}
        rec = next(r for r in res.records if r.entity_id == "alpha")
        assert rec.wealth_by_year == {2006: 3e9, 2007: 4e9}

    def test_duplicate_year_is_malformed(self, tmp_path):
        p = tmp_path / "w.csv"
        p.write_text(self.TEXT + "alpha,2007,9e9,EUR\n")
        res = load_samples(p, {"kind": "wealth", "max_malformed_fraction": "0.5"})
        assert any("duplicate year" in msg for _, msg in res.errors)

    def test_currency_mismatch_is_malformed(self, tmp_path):
        p = tmp_path / "w.csv"
        p.write_text(self.TEXT + "alpha,2008,9e9,USD\n")
        res = load_samples(p, {"kind": "wealth", "max_malformed_fraction": "0.5"})
        assert any("currency mismatch" in msg for _, msg in res.errors)

    def test_single_year_entity_skipped_with_notice(self, tmp_path):
        p = tmp_path / "w.csv"
        p.write_text(self.TEXT + "gamma,2007,5e9,EUR\n")
        with pytest.warns(UserWarning, match="gamma"):
            res = load_samples(p, {"kind": "wealth"})
        assert {r.entity_id for r in res.records} == {"alpha", "beta"}
        assert any("gamma" in n for n in res.notices)

    def test_feeds_conversion(self, tmp_path):
        p = tmp_path / "w.csv"
        p.write_text(self.TEXT)
        res = load_samples(p, {"kind": "wealth"})
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            out = incomes_from_wealth(res.records, 2006, 2007, fx=1.0)
        assert sorted(s.income for s in out.samples) == [1e9, 1e9]
