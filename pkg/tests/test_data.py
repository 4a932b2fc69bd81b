import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from convexfm.data import Dataset, FeatureBlock, SplitSpec, \
    append_features, attach_entity_features, knn_side_features, \
    movielens_to_dataset, multiview_encode, parse_libfm, \
    ratings_to_dataset, read_dataset, split, synth_generate, write_libfm
from convexfm.exceptions import ContractError, InputError, ParseError
from convexfm.sparse import SparseDesignMatrix

from conftest import make_dataset


def _rows(ds):
    return sorted(zip(map(tuple, ds.X.toarray()), ds.y))


class TestDataset:
    def test_layout_must_partition(self):
        X = SparseDesignMatrix.from_dense(np.eye(3))
        with pytest.raises(ContractError):
            Dataset(X, np.zeros(3), [FeatureBlock("a", 0, 2)])
        with pytest.raises(ContractError):
            Dataset(X, np.zeros(3), [FeatureBlock("a", 0, 2),
                                     FeatureBlock("b", 1, 2)])
        with pytest.raises(ContractError):
            Dataset(X, np.zeros(3), [FeatureBlock("a", 0, 1),
                                     FeatureBlock("a", 1, 2)])

    def test_targets_must_match(self):
        X = SparseDesignMatrix.from_dense(np.eye(2))
        with pytest.raises(ContractError):
            Dataset(X, np.zeros(3), [FeatureBlock("a", 0, 2)])
        with pytest.raises(InputError):
            Dataset(X, [1.0, np.nan], [FeatureBlock("a", 0, 2)])

    def test_squared_design_is_cached(self):
        ds = make_dataset([[2.0, -3.0]], [1.0])
        assert_array_equal(ds.Xsq.toarray(), [[4.0, 9.0]])
        assert (ds.n, ds.d, len(ds)) == (1, 2, 1)

    def test_unknown_block(self):
        ds = make_dataset([[1.0]], [1.0])
        with pytest.raises(ContractError):
            ds.block("users")


class TestMovielens:
    def test_single_record(self, tmp_path):
        path = tmp_path / "u.data"
        path.write_text("1\t10\t4.0\t0\n")
        ds = movielens_to_dataset(path)
        assert ds.d == 2
        assert_array_equal(ds.y, [4.0])
        assert_array_equal(ds.X.toarray(), [[1.0, 1.0]])

    def test_shared_user(self, tmp_path):
        path = tmp_path / "u.data"
        path.write_text("7\t1\t3\t100\n7\t2\t5\t101\n")
        ds = movielens_to_dataset(path, "tab_100k")
        assert ds.block("users") == FeatureBlock("users", 0, 1)
        assert ds.block("items") == FeatureBlock("items", 1, 2)
        assert ds.vocabularies["items"] == ("1", "2")

    def test_colon_format(self, tmp_path):
        path = tmp_path / "ratings.dat"
        path.write_text("1::1193::5::978300760\n2::1193::3::978302109\n"
                        "1::661::3::978302109\n")
        ds = read_dataset(path, "ml-1m")
        assert (ds.n, ds.d) == (3, 4)
        assert ds.vocabularies["users"] == ("1", "2")
        assert_array_equal(ds.block_index("items"), [0, 0, 1])

    def test_first_appearance_order(self, ratings_records):
        ds = ratings_to_dataset(ratings_records)
        assert ds.vocabularies["users"] == ("u1", "u2", "u3")
        assert ds.vocabularies["items"] == ("i1", "i2", "i3")
        assert_array_equal(ds.block_index("users"),
                           [0, 0, 1, 1, 2, 2, 0, 2])

    def test_two_ones_per_row(self, ratings_records):
        ds = ratings_to_dataset(ratings_records)
        assert np.all(np.diff(ds.X.row_offsets) == 2)
        assert np.all(ds.X.values == 1.0)

    @pytest.mark.parametrize("line", ["1\t2\t3", "1\t2\tfive\t0",
                                      "\t2\t3\t0"])
    def test_malformed(self, tmp_path, line):
        path = tmp_path / "u.data"
        path.write_text("1\t1\t1\t0\n" + line + "\n")
        with pytest.raises(ParseError) as info:
            movielens_to_dataset(path)
        assert info.value.line == 2

    def test_unknown_format(self, tmp_path):
        with pytest.raises(InputError):
            read_dataset(tmp_path / "x", "csv")


class TestLibfm:
    def test_override_dimension(self, tmp_path):
        path = tmp_path / "data.libfm"
        path.write_text("3.5 0:1 4:1\n")
        ds = parse_libfm(path, d=6)
        assert ds.d == 6
        assert_array_equal(ds.y, [3.5])
        assert_array_equal(ds.X.toarray(), [[1, 0, 0, 0, 1, 0]])
        assert ds.block_layout == (FeatureBlock("libfm", 0, 6),)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.libfm"
        path.write_text("")
        ds = parse_libfm(path)
        assert (ds.n, ds.d) == (0, 0)

    def test_round_trip(self, tmp_path):
        path = tmp_path / "in.libfm"
        path.write_text("# a comment\n0.1 2:0.3333333333333333 0:-1e-7\n\n"
                        "-2.5 1:3.14159 2:2e10\n7 \n")
        ds = parse_libfm(path)
        write_libfm(ds, tmp_path / "out.libfm")
        again = parse_libfm(tmp_path / "out.libfm")
        assert_array_equal(again.y, ds.y)
        assert_array_equal(again.X.values, ds.X.values)
        assert_array_equal(again.X.col_indices, ds.X.col_indices)
        assert_array_equal(again.X.row_offsets, ds.X.row_offsets)

    def test_layout_survives_round_trip(self, tmp_path, ratings_records):
        ds = ratings_to_dataset(ratings_records)
        write_libfm(ds, tmp_path / "r.libfm")
        again = parse_libfm(tmp_path / "r.libfm")
        assert again.block_layout == ds.block_layout
        assert_array_equal(again.X.toarray(), ds.X.toarray())

    @pytest.mark.parametrize("content", ["1 0:1 0:2\n", "1 a:1\n",
                                         "1 0:x\n", "x 0:1\n", "1 0\n",
                                         "nan 1:1\n", "1 0:inf\n"])
    def test_malformed(self, tmp_path, content):
        path = tmp_path / "bad.libfm"
        path.write_text("2 1:1\n" + content)
        with pytest.raises(ParseError) as info:
            parse_libfm(path)
        assert info.value.line == 2
        assert str(path) in str(info.value)

    def test_index_out_of_range(self, tmp_path):
        path = tmp_path / "d.libfm"
        path.write_text("1 5:1\n")
        with pytest.raises(ParseError):
            parse_libfm(path, d=3)


class TestMultiview:
    def test_small(self):
        cells = [("v", "g1", "d1", 0.5), ("v", "g1", "d2", 1.5),
                 ("v", "g2", "d1", -1.0), ("v", "g2", "d2", 2.0)]
        ds = multiview_encode(cells)
        assert (ds.n, ds.d) == (4, 5)
        assert np.all(np.diff(ds.X.row_offsets) == 3)
        assert [block.name for block in ds.block_layout] \
            == ["rows", "cols", "views"]
        assert_array_equal(ds.y, [0.5, 1.5, -1.0, 2.0])

    def test_gene_drug_layout(self):
        cells = [("view1" if k % 2 else "view0", f"gene{k}", f"drug{k % 78}",
                  float(k)) for k in range(3327)]
        ds = multiview_encode(cells)
        assert ds.d == 3327 + 78 + 2

    def test_duplicates_are_kept(self):
        ds = multiview_encode([("v", "a", "b", 1.0), ("v", "a", "b", 3.0)])
        assert ds.n == 2
        assert_array_equal(ds.X.toarray()[0], ds.X.toarray()[1])


class TestKnnFeatures:
    def test_identical_entities(self):
        mean, std = knn_side_features([[1.0, 2.0], [1.0, 2.0]], 1)
        assert_allclose(mean, [1.0, 1.0])
        assert_allclose(std, [0.0, 0.0])

    def test_single_neighbour_has_no_spread(self, rng):
        _, std = knn_side_features(rng.standard_normal((6, 3)), 1)
        assert_array_equal(std, 0.0)

    def test_points_on_a_line(self):
        base = np.array([[0.0], [1.0], [2.0], [10.0]])
        mean, std = knn_side_features(base, 2, bandwidth=1.0)
        values = np.array([np.exp(-0.5), np.exp(-2.0)])
        assert mean[0] == pytest.approx(values.mean(), rel=1e-12)
        assert std[0] == pytest.approx(values.std(), rel=1e-12)

    def test_median_bandwidth(self):
        base = np.array([[0.0], [1.0], [3.0]])
        # pairwise distances 1, 3, 2
        explicit = knn_side_features(base, 1, bandwidth=2.0)
        default = knn_side_features(base, 1)
        assert_allclose(default[0], explicit[0])

    @pytest.mark.parametrize("m, bandwidth", [(0, 1.0), (3, 1.0),
                                              (1, 0.0)])
    def test_invalid(self, m, bandwidth):
        with pytest.raises(ContractError):
            knn_side_features(np.eye(3), m, bandwidth)


class TestSideFeatures:
    def test_append(self, ratings_records):
        ds = ratings_to_dataset(ratings_records)
        extended = append_features(ds, np.arange(ds.n, dtype=float), "age")
        assert extended.d == ds.d + 1
        assert extended.block("age") == FeatureBlock("age", ds.d, 1)
        assert_array_equal(extended.X.toarray()[:, -1], np.arange(ds.n))
        assert_array_equal(extended.X.toarray()[:, :-1], ds.X.toarray())

    def test_attach_entity_features(self, ratings_records):
        ds = ratings_to_dataset(ratings_records)
        table = np.array([[10.0, 1.0], [20.0, 2.0], [30.0, 3.0]])
        extended = attach_entity_features(ds, "items", table, "item_knn")
        expected = table[ds.block_index("items")]
        assert_array_equal(extended.X.toarray()[:, ds.d:], expected)

    def test_wrong_table_size(self, ratings_records):
        ds = ratings_to_dataset(ratings_records)
        with pytest.raises(ContractError):
            attach_entity_features(ds, "items", np.ones((2, 1)), "x")
        with pytest.raises(ContractError):
            append_features(ds, np.ones(ds.n + 1), "x")


class TestSynthetic:
    def test_formula(self):
        ds, truth = synth_generate(2, 5, seed=11)
        X = ds.X.toarray()
        a, b = X[:, 0], X[:, 1]
        expected = truth.w0 + truth.w[0] * a + truth.w[1] * b \
            + truth.W[0, 1] * a * b
        assert_allclose(ds.y, expected, rtol=1e-12, atol=1e-12)
        assert truth.W[1, 0] == 0.0 and truth.W[0, 0] == 0.0
        assert 0.0 <= truth.W[0, 1] <= 1.0

    def test_deterministic(self):
        first, _ = synth_generate(5, 20, seed=4)
        second, _ = synth_generate(5, 20, seed=4)
        assert_array_equal(first.X.toarray(), second.X.toarray())
        assert_array_equal(first.y, second.y)

    def test_truth_reproduces_targets(self):
        ds, truth = synth_generate(10, 50, seed=1)
        assert_allclose(truth.response(ds.X.toarray()), ds.y, rtol=1e-12,
                        atol=1e-12)
        assert ds.X.nnz == 500

    def test_invalid(self):
        with pytest.raises(ContractError):
            synth_generate(1, 10, 0)
        with pytest.raises(ContractError):
            synth_generate(3, 0, 0)


class TestSplit:
    def test_sizes(self):
        ds = make_dataset(np.eye(4), np.arange(4.0))
        train, test = split(ds, SplitSpec(0.75, seed=0))
        assert (train.n, test.n) == (3, 1)
        assert train.block_layout == ds.block_layout

    def test_deterministic_and_complete(self, ratings_records):
        ds = ratings_to_dataset(ratings_records)
        train, test = split(ds, SplitSpec(0.5, seed=9))
        again, _ = split(ds, SplitSpec(0.5, seed=9))
        assert_array_equal(train.y, again.y)
        assert _rows(ds) == sorted(_rows(train) + _rows(test))

    def test_degenerate(self):
        ds = make_dataset(np.eye(3), np.arange(3.0))
        with pytest.raises(ContractError):
            split(ds, SplitSpec(0.1, seed=0))
        with pytest.raises(ContractError):
            split(make_dataset(np.eye(1), [1.0]), SplitSpec(0.5))
        with pytest.raises(ContractError):
            SplitSpec(1.0)
