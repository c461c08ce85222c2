import unittest
from fractions import Fraction

from fftconv.config import LayerConfig, reference_configs
from fftconv.cost_model import (
    DEFAULT_C,
    CostParams,
    crossover_table,
    memory_bytes,
    memory_table,
    op_count_table,
    ops_forward,
    ops_grad_input,
    ops_grad_weight,
    packed_memory_bytes,
    ram_rows,
    ram_table,
)
from fftconv.dtypes import dtypes
from fftconv.errors import ConfigError
from fftconv.report import Table


class TestOpCounts(unittest.TestCase):
    def test_smallest_layer(self):
        counts = ops_forward(CostParams(LayerConfig(1, 2, 1, 1, 1), C=1))
        self.assertEqual(counts.direct_ops, 4)
        self.assertEqual(counts.fft_ops, 40)
        self.assertEqual(counts.breakdown, (16, 16, 8))
        self.assertAlmostEqual(counts.ratio, 0.1)

    def test_exact_arithmetic(self):
        counts = ops_forward(CostParams(LayerConfig(3, 16, 2, 3, 4)))
        self.assertIsInstance(counts.fft_ops, int)
        self.assertEqual(counts.fft_ops, sum(counts.breakdown))
        self.assertEqual(CostParams(LayerConfig(3, 16, 2, 3), C=2.5).C, DEFAULT_C)
        odd = ops_forward(CostParams(LayerConfig(1, 2, 1, 1, 1), C=Fraction(1, 3)))
        self.assertEqual(odd.breakdown[0], Fraction(16, 3))
        self.assertEqual(odd.fft_ops, 24)

    def test_rows(self):
        c = LayerConfig(5, 16, 2, 3, 4)
        p = CostParams(c, C=1)
        self.assertEqual(ops_forward(p).direct_ops, 4 * 3 * 2 * 12**2 * 25)
        self.assertEqual(ops_grad_input(p).direct_ops, 4 * 3 * 2 * 16**2 * 25)
        self.assertEqual(ops_grad_weight(p).direct_ops, ops_forward(p).direct_ops)
        # updateGradInput transforms at n' = 12, which is not a power of 2
        self.assertIsInstance(ops_grad_input(p).breakdown[0], float)
        self.assertEqual(ops_grad_weight(p).breakdown, (2 * 256 * 4 * (12 + 8), 4 * 24 * 256, 2 * 256 * 4 * 6))

    def test_fft_beats_direct_on_large_layer(self):
        for C in (1, 2, DEFAULT_C, 4, 5):
            for n in (16, 32, 64):
                counts = ops_forward(CostParams(LayerConfig(7, n, 96, 256, 128), C=C))
                self.assertLess(counts.fft_ops, counts.direct_ops, (C, n))

    def test_fft_counts_independent_of_kernel(self):
        counts = {ops_forward(CostParams(LayerConfig(k, 32, 8, 16, 4))).fft_ops for k in (1, 3, 5, 7, 11)}
        self.assertEqual(len(counts), 1)

    def test_monotone(self):
        base = dict(k=5, n=16, f=4, f_prime=4, S=4)
        for field in ("f", "f_prime", "S"):
            small = ops_forward(CostParams(LayerConfig(**base)))
            large = ops_forward(CostParams(LayerConfig(**{**base, field: 8})))
            self.assertLess(small.direct_ops, large.direct_ops, field)
            self.assertLess(small.fft_ops, large.fft_ops, field)
        small = ops_forward(CostParams(LayerConfig(**base)))
        large = ops_forward(CostParams(LayerConfig(**{**base, "n": 32})))
        self.assertLess(small.fft_ops, large.fft_ops)

    def test_pad_to_pow2(self):
        padded = ops_forward(CostParams(LayerConfig(3, 13, 2, 2, 2), pad_to_pow2=True))
        self.assertEqual(padded.fft_ops, ops_forward(CostParams(LayerConfig(3, 16, 2, 2, 2))).fft_ops)
        self.assertIsInstance(ops_forward(CostParams(LayerConfig(3, 13, 2, 2, 2))).fft_ops, float)

    def test_invalid_constant(self):
        for C in (0, -1, Fraction(-1, 2)):
            with self.assertRaises(ConfigError):
                CostParams(LayerConfig(3, 8, 1, 1), C=C)

    def test_op_count_table(self):
        table = op_count_table(CostParams(LayerConfig(7, 32, 96, 256, 128)))
        self.assertEqual(table.column("op"), ["updateOutput", "updateGradInput", "accGradParameters"])
        self.assertIn("transform_ops", table.columns)


class TestMemory(unittest.TestCase):
    def test_bytes(self):
        self.assertEqual(memory_bytes(LayerConfig(1, 16, 96, 256, 128)), 75_759_616)
        self.assertEqual(memory_bytes(LayerConfig(1, 32, 96, 256, 128)), 294_125_568)
        self.assertEqual(memory_bytes(LayerConfig(1, 64, 96, 256, 64)), 783_810_560)

    def test_ram_table(self):
        rows = ram_rows()
        self.assertEqual(len(rows), 8)
        self.assertEqual([r.matches for r in rows], [True] * 4 + [False] * 4)
        self.assertEqual([r.computed_mb for r in rows[4:]], [196, 761, 267, 1038])
        table = ram_table()
        self.assertEqual(table.column("printed_MB"), [76, 294, 784, 1159, 151, 588, 214, 830])
        self.assertEqual(table.column("match").count("yes"), 4)

    def test_memory_table(self):
        table = memory_table(LayerConfig(5, 16, 256, 384, 128))
        self.assertEqual(table.column("printed_MB"), [151])
        self.assertEqual(table.column("formula_MB"), [196])
        self.assertEqual(memory_table(LayerConfig(5, 16, 2, 3, 4)).column("printed_MB"), [None])

    def test_packed(self):
        c = LayerConfig(3, 13, 2, 3, 4)
        self.assertEqual(packed_memory_bytes(c), 8 * 16 * 9 * (8 + 6 + 12))
        self.assertEqual(packed_memory_bytes(c, dtypes.float64), 2 * packed_memory_bytes(c))

    def test_second_reference_layer_needs_most(self):
        sizes = [memory_bytes(c) for c in reference_configs()]
        self.assertEqual(sizes.index(max(sizes)), 1)


class TestCrossover(unittest.TestCase):
    def test_crossover(self):
        table = crossover_table(8, 8, 8, 5, n_values=(8, 16, 32, 64))
        self.assertEqual(table.column("n"), [8, 16, 32, 64])
        wins = table.column("fft_wins")
        self.assertEqual(wins[0], "no")
        self.assertEqual(wins[-1], "yes")

    def test_small_layer_prefers_direct(self):
        self.assertEqual(crossover_table(1, 1, 1, 1, n_values=[8]).column("fft_wins"), ["no"])

    def test_single_width(self):
        self.assertEqual(len(crossover_table(96, 256, 128, 7, n_values=[32])), 1)

    def test_errors(self):
        with self.assertRaises(ConfigError):
            crossover_table(1, 1, 1, 3)
        with self.assertRaises(ConfigError):
            crossover_table(1, 1, 1, 9, n_values=[8])


class TestTable(unittest.TestCase):
    def test_render(self):
        table = Table(("a", "b"), title="t")
        table.add(1, None)
        table.bold.add((table.add(2, 0.5), "b"))
        self.assertEqual(table.to_csv(), "a,b\n1,\n2,0.5\n")
        md = table.to_markdown()
        self.assertTrue(md.startswith("### t\n"))
        self.assertIn("**0.500**", md)
        self.assertIn("| 1 | -", md)
        self.assertEqual(table.render("csv"), table.to_csv())
