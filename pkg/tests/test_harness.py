"""Tests for CSV ingestion, sweep configuration, and the sweep runner."""

import json

import numpy as np
import pytest

import fourier_audit as fa
from fourier_audit.harness import SWEEP_HEADER


def write_csv(path, header, rows):
    lines = [",".join(header)] + [",".join(str(c) for c in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


BINARY = {"kind": "binary"}


class TestSupportLookup:
    def test_labels_on_support(self):
        points = np.array([[1, 1, -1], [-1, 1, 1]], dtype=np.int8)
        labels = np.array([1, -1])
        oracle = fa.SupportLookup(points, labels)
        got = oracle.query_batch(points[::-1].copy())
        assert got.tolist() == [-1, 1]

    def test_off_support_point_rejected(self):
        oracle = fa.SupportLookup(np.array([[1, 1]], dtype=np.int8), np.array([1]))
        with pytest.raises(fa.OracleError):
            oracle.query_batch(np.array([[-1, 1]], dtype=np.int8))

    def test_one_label_per_row_required(self):
        with pytest.raises(fa.InvalidSpecError):
            fa.SupportLookup(np.ones((3, 2), dtype=np.int8), np.array([1, -1]))


class TestIngestCsv:
    def test_two_row_binary_file(self, tmp_path):
        path = write_csv(
            tmp_path / "tiny.csv",
            ["f1", "group", "label"],
            [[1, 1, 1], [-1, -1, -1]],
        )
        schema = {"f1": BINARY, "group": BINARY, "label": BINARY}
        table, dist, oracle = fa.ingest_csv(path, schema, "label", "group")
        assert isinstance(dist, fa.Empirical)
        assert dist.points.shape == (2, 2)
        assert sorted(dist.weights.tolist()) == [0.5, 0.5]
        assert table.header == ("f1", "group")
        assert table.sensitive_index == 2
        assert oracle.query_batch(np.array([[1, 1]], dtype=np.int8)).tolist() == [1]
        assert oracle.query_batch(np.array([[-1, -1]], dtype=np.int8)).tolist() == [-1]

    def test_threshold_cut_codes_sign(self, tmp_path):
        path = write_csv(
            tmp_path / "ages.csv",
            ["age", "group", "label"],
            [[18, 1, 1], [45, 1, -1]],
        )
        schema = {
            "age": {"kind": "threshold", "cut": 30},
            "group": BINARY,
            "label": BINARY,
        }
        table, _, _ = fa.ingest_csv(path, schema, "label", "group")
        age_col = table.header.index("age")
        assert sorted(table.rows[:, age_col].tolist()) == [-1, 1]

    def test_onehot_expands_indicator_columns(self, tmp_path):
        path = write_csv(
            tmp_path / "colors.csv",
            ["color", "group", "label"],
            [["red", 1, 1], ["blue", -1, -1]],
        )
        schema = {
            "color": {"kind": "onehot", "categories": ["red", "green", "blue"]},
            "group": BINARY,
            "label": BINARY,
        }
        table, _, _ = fa.ingest_csv(path, schema, "label", "group")
        assert table.header == ("color=red", "color=green", "color=blue", "group")
        indicators = table.rows[:, :3]
        assert np.all(np.sum(indicators == 1, axis=1) == 1)
        assert table.sensitive_index == 4

    def test_duplicate_rows_merge_with_majority_label(self, tmp_path):
        path = write_csv(
            tmp_path / "dups.csv",
            ["f1", "group", "label"],
            [[1, 1, 1], [1, 1, 1], [1, 1, -1], [-1, 1, 1], [-1, 1, -1]],
        )
        schema = {"f1": BINARY, "group": BINARY, "label": BINARY}
        _, dist, oracle = fa.ingest_csv(path, schema, "label", "group")
        assert dist.points.shape[0] == 2
        assert sorted(dist.weights.tolist()) == [0.4, 0.6]
        # Majority of (+1, +1, -1) is +1; the (+1, -1) tie also resolves to +1.
        assert oracle.query_batch(np.array([[1, 1]], dtype=np.int8)).tolist() == [1]
        assert oracle.query_batch(np.array([[-1, 1]], dtype=np.int8)).tolist() == [1]

    def test_unmapped_category_raises(self, tmp_path):
        path = write_csv(
            tmp_path / "bad_cat.csv",
            ["color", "group", "label"],
            [["mauve", 1, 1], ["red", -1, -1]],
        )
        schema = {
            "color": {"kind": "onehot", "categories": ["red", "blue"]},
            "group": BINARY,
            "label": BINARY,
        }
        with pytest.raises(fa.UnmappedCategoryError):
            fa.ingest_csv(path, schema, "label", "group")

    def test_non_numeric_cell_raises(self, tmp_path):
        path = write_csv(
            tmp_path / "bad_num.csv",
            ["age", "group", "label"],
            [["young", 1, 1]],
        )
        schema = {
            "age": {"kind": "threshold", "cut": 30},
            "group": BINARY,
            "label": BINARY,
        }
        with pytest.raises(fa.NonNumericCellError):
            fa.ingest_csv(path, schema, "label", "group")

    def test_header_only_file_raises(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("f1,group,label\n", encoding="utf-8")
        schema = {"f1": BINARY, "group": BINARY, "label": BINARY}
        with pytest.raises(fa.EmptyFileError):
            fa.ingest_csv(path, schema, "label", "group")

    def test_schema_must_cover_every_column(self, tmp_path):
        path = write_csv(
            tmp_path / "uncovered.csv",
            ["f1", "group", "label"],
            [[1, 1, 1]],
        )
        schema = {"group": BINARY, "label": BINARY}
        with pytest.raises(fa.InvalidSpecError):
            fa.ingest_csv(path, schema, "label", "group")

    def test_label_must_code_to_one_column(self, tmp_path):
        path = write_csv(
            tmp_path / "wide_label.csv",
            ["f1", "group", "label"],
            [[1, 1, "yes"]],
        )
        schema = {
            "f1": BINARY,
            "group": BINARY,
            "label": {"kind": "onehot", "categories": ["yes", "no"]},
        }
        with pytest.raises(fa.InvalidSpecError):
            fa.ingest_csv(path, schema, "label", "group")

    def test_schema_loads_from_json_file(self, tmp_path):
        path = write_csv(
            tmp_path / "tiny.csv",
            ["f1", "group", "label"],
            [[1, 1, 1], [-1, -1, -1]],
        )
        schema_path = tmp_path / "schema.json"
        schema_path.write_text(
            json.dumps({"f1": BINARY, "group": BINARY, "label": BINARY}),
            encoding="utf-8",
        )
        table, _, _ = fa.ingest_csv(path, schema_path, "label", "group")
        assert table.header == ("f1", "group")

    def test_coded_cells_are_all_plus_minus_one(self, tmp_path):
        rng = np.random.default_rng(3)
        rows = [
            [
                rng.choice([-1, 1]),
                rng.integers(0, 60),
                rng.choice(["a", "b", "c"]),
                rng.choice([-1, 1]),
                rng.choice([-1, 1]),
            ]
            for _ in range(40)
        ]
        path = write_csv(
            tmp_path / "mixed.csv", ["f1", "age", "cat", "group", "label"], rows
        )
        schema = {
            "f1": BINARY,
            "age": {"kind": "threshold", "cut": 30},
            "cat": {"kind": "onehot", "categories": ["a", "b", "c"]},
            "group": BINARY,
            "label": BINARY,
        }
        table, _, _ = fa.ingest_csv(path, schema, "label", "group")
        assert np.all(np.abs(table.rows) == 1)
        assert np.all(np.abs(table.labels) == 1)

    def test_hundred_row_table_satisfies_parseval(self, tmp_path):
        rng = np.random.default_rng(11)
        rows = [
            [
                rng.choice([-1, 1]),
                rng.choice([-1, 1]),
                rng.choice([-1, 1]),
                rng.integers(0, 60),
                rng.choice([-1, 1]),
                rng.choice([-1, 1]),
            ]
            for _ in range(100)
        ]
        path = write_csv(
            tmp_path / "synthetic.csv",
            ["f1", "f2", "f3", "age", "group", "label"],
            rows,
        )
        schema = {
            "f1": BINARY,
            "f2": BINARY,
            "f3": BINARY,
            "age": {"kind": "threshold", "cut": 30},
            "group": BINARY,
            "label": BINARY,
        }
        _, dist, oracle = fa.ingest_csv(path, schema, "label", "group")
        spectrum = fa.exact_fourier_spectrum(oracle, dist)
        assert spectrum.parseval_total() == pytest.approx(1.0, abs=1e-6)


class TestParseProperty:
    def test_short_names(self):
        assert isinstance(fa.parse_property("rob", rho=0.5), fa.Robustness)
        assert isinstance(
            fa.parse_property("if", rho=0.5, l=2), fa.IndividualFairness
        )
        assert isinstance(fa.parse_property("sp", sensitive=1), fa.StatisticalParity)
        assert isinstance(fa.parse_property("mc", sensitive=2), fa.Multicalibration)

    def test_long_names_and_case(self):
        assert isinstance(fa.parse_property("Robustness", rho=0.25), fa.Robustness)
        assert isinstance(
            fa.parse_property("STATISTICAL-PARITY", sensitive=3), fa.StatisticalParity
        )

    def test_missing_parameters_rejected(self):
        with pytest.raises(fa.InvalidParameterError):
            fa.parse_property("rob")
        with pytest.raises(fa.InvalidParameterError):
            fa.parse_property("if", rho=0.5)
        with pytest.raises(fa.InvalidParameterError):
            fa.parse_property("sp")

    def test_unknown_property_rejected(self):
        with pytest.raises(fa.InvalidParameterError):
            fa.parse_property("equalized-odds")


class TestSweepConfig:
    def make(self, **overrides):
        kwargs = dict(
            dist=fa.Uniform(3),
            property=fa.StatisticalParity(1),
            methods=("Exact",),
            budgets=(100,),
            seeds=1,
            model="maj3",
        )
        kwargs.update(overrides)
        return fa.SweepConfig(**kwargs)

    def test_valid_config_accepted(self):
        cfg = self.make(methods=("AFA", "Uniform", "Exact"), budgets=(10, 20, 40))
        assert cfg.tau == 0.2
        assert cfg.delta == 0.05

    def test_budgets_must_strictly_increase(self):
        with pytest.raises(fa.InvalidSpecError):
            self.make(budgets=(100, 100))
        with pytest.raises(fa.InvalidSpecError):
            self.make(budgets=(200, 100))

    def test_budgets_must_be_positive_and_nonempty(self):
        with pytest.raises(fa.InvalidSpecError):
            self.make(budgets=())
        with pytest.raises(fa.InvalidSpecError):
            self.make(budgets=(0, 100))

    def test_seeds_at_least_one(self):
        with pytest.raises(fa.InvalidSpecError):
            self.make(seeds=0)

    def test_unknown_method_rejected(self):
        with pytest.raises(fa.InvalidSpecError):
            self.make(methods=("Exact", "Antithetic"))
        with pytest.raises(fa.InvalidSpecError):
            self.make(methods=())

    def test_exactly_one_model_source(self):
        with pytest.raises(fa.InvalidSpecError):
            self.make(model=None)
        with pytest.raises(fa.InvalidSpecError):
            self.make(endpoint="tcp:127.0.0.1:9")


class TestParseConfig:
    def test_full_config_with_comments(self):
        cfg = fa.parse_config(
            """
            # audit sweep
            model = maj3
            dist = uniform
            n = 3

            property = rob
            rho = 0.5
            methods = AFA, Uniform, Exact
            budgets = 100, 200, 400
            seeds = 5
            tau = 0.3
            """
        )
        assert isinstance(cfg.dist, fa.Uniform)
        assert cfg.dist.n == 3
        assert isinstance(cfg.property, fa.Robustness)
        assert cfg.methods == ("AFA", "Uniform", "Exact")
        assert cfg.budgets == (100, 200, 400)
        assert cfg.seeds == 5
        assert cfg.tau == 0.3
        assert cfg.delta == 0.05

    def test_product_distribution(self):
        cfg = fa.parse_config(
            "model = maj3\n"
            "dist = product:-0.5,0.0,0.5\n"
            "property = sp\n"
            "sensitive = 2\n"
            "methods = Exact\n"
            "budgets = 10\n"
            "seeds = 1\n"
        )
        assert isinstance(cfg.dist, fa.Product)
        assert tuple(cfg.dist.biases) == (-0.5, 0.0, 0.5)
        assert cfg.property.sensitive == 2

    def test_csv_distribution_defaults_sensitive(self, tmp_path):
        data = write_csv(
            tmp_path / "d.csv",
            ["f1", "group", "label"],
            [[1, 1, 1], [-1, -1, -1], [1, -1, -1]],
        )
        schema_path = tmp_path / "schema.json"
        schema_path.write_text(
            json.dumps({"f1": BINARY, "group": BINARY, "label": BINARY}),
            encoding="utf-8",
        )
        cfg = fa.parse_config(
            f"dist = csv\ncsv = {data}\nschema = {schema_path}\n"
            "label_col = label\nsensitive_col = group\n"
            "property = sp\nmethods = Exact\nbudgets = 10\nseeds = 1\n"
        )
        assert isinstance(cfg.dist, fa.Empirical)
        assert cfg.oracle is not None
        assert cfg.model is None
        assert cfg.property.sensitive == 2

    def test_missing_key_rejected(self):
        with pytest.raises(fa.InvalidSpecError):
            fa.parse_config(
                "model = maj3\ndist = uniform\nn = 3\nproperty = rob\nrho = 0.5\n"
            )

    def test_line_without_equals_rejected(self):
        with pytest.raises(fa.InvalidSpecError):
            fa.parse_config("model maj3\n")

    def test_unknown_dist_rejected(self):
        with pytest.raises(fa.InvalidSpecError):
            fa.parse_config(
                "model = maj3\ndist = gaussian\nproperty = sp\nsensitive = 1\n"
                "methods = Exact\nbudgets = 10\nseeds = 1\n"
            )


class TestMcReference:
    def test_group_property_reports_rate_gap(self):
        model = fa.build_model("dictator:1", n=4)
        ref = fa.mc_reference(
            model, fa.Uniform(4), fa.StatisticalParity(1), draws=4000, rng=0
        )
        assert ref == pytest.approx(1.0)

    def test_perturbation_property_reports_correlation(self):
        model = fa.build_model("dictator:1", n=4)
        ref = fa.mc_reference(
            model, fa.Uniform(4), fa.Robustness(0.5), draws=40_000, rng=0
        )
        assert ref == pytest.approx(0.5, abs=0.05)


class TestRunSweep:
    def test_exact_only_error_column_zero(self):
        cfg = fa.SweepConfig(
            dist=fa.Uniform(3),
            property=fa.StatisticalParity(1),
            methods=("Exact",),
            budgets=(10,),
            seeds=3,
            model="maj3",
        )
        result = fa.run_sweep(cfg)
        assert result.reference_kind == "exact"
        assert len(result.rows) == 3
        assert all(row.abs_error == 0.0 for row in result.rows)

    def test_grid_complete_in_deterministic_order(self):
        cfg = fa.SweepConfig(
            dist=fa.Uniform(3),
            property=fa.Robustness(0.5),
            methods=("AFA", "Uniform", "Exact"),
            budgets=(300, 600),
            seeds=2,
            model="maj3",
        )
        result = fa.run_sweep(cfg)
        keys = [(row.method, row.budget, row.seed) for row in result.rows]
        assert keys == [
            (method, budget, seed)
            for method in ("AFA", "Uniform", "Exact")
            for budget in (300, 600)
            for seed in (1, 2)
        ]

    def test_rerun_is_byte_identical_modulo_wall_time(self, tmp_path):
        def strip_wall(text: str) -> list[str]:
            kept = []
            for line in text.splitlines():
                if line.startswith("#") or line == SWEEP_HEADER:
                    kept.append(line)
                else:
                    kept.append(line.rsplit(",", 1)[0])
            return kept

        outputs = []
        for name in ("a.csv", "b.csv"):
            cfg = fa.SweepConfig(
                dist=fa.Uniform(3),
                property=fa.StatisticalParity(1),
                methods=("AFA", "Uniform"),
                budgets=(200, 400),
                seeds=2,
                model="maj3",
                out=str(tmp_path / name),
            )
            fa.run_sweep(cfg)
            outputs.append((tmp_path / name).read_text(encoding="utf-8"))
        assert outputs[0].startswith(SWEEP_HEADER + "\n")
        assert strip_wall(outputs[0]) == strip_wall(outputs[1])

    def test_failed_run_recorded_in_row_and_sweep_continues(self):
        cfg = fa.SweepConfig(
            dist=fa.Uniform(3),
            property=fa.StatisticalParity(1),
            methods=("AFA", "Exact"),
            budgets=(6,),
            seeds=1,
            model="maj3",
            tau=0.15,
        )
        result = fa.run_sweep(cfg)
        assert len(result.rows) == 2
        failed = result.rows[0]
        assert failed.method == "AFA"
        assert failed.error is not None
        assert failed.estimate is None
        assert failed.queries == 0
        exact_row = result.rows[1]
        assert exact_row.abs_error == 0.0
        rendered = result.render()
        assert "# error: method=AFA budget=6 seed=1" in rendered

    def test_large_dimension_uses_mc_reference(self):
        cfg = fa.SweepConfig(
            dist=fa.Uniform(13),
            property=fa.StatisticalParity(1),
            methods=("Uniform",),
            budgets=(400,),
            seeds=1,
            model="dictator:1",
        )
        result = fa.run_sweep(cfg)
        assert result.reference_kind == "mc-reference"
        assert result.reference == pytest.approx(1.0, abs=0.01)
        assert result.render().splitlines()[1] == "# exact=mc-reference"
