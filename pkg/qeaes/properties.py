"""Classes to describe callable objects gathering one or multiple formulas."""

import numpy as np

from .config import CONFIG
from .format import format_bits, format_output_type
from .formulas.aes import SubBytesFormulas
from .formulas.randomness import NistFormulas


class Property:
    """Base class for callables that can be computed by various sources"""

    # Below, to define in subclasses
    Formulas = ()  # iterable of formulae available to calculate the property
    quantity = None
    unit = None

    def __init__(self):

        self.formulas = {}  # dict source_name: formula object

        for Formula in self.Formulas:

            formula = Formula()
            source = formula.source
            self.formulas[source] = formula

            if formula.default:
                self._default_source = source

        self.sources = tuple(self.formulas)  # only the source names

    def __repr__(self):
        return f'{self.quantity.capitalize()} {self.unit} (default: {self.default_source})'

    @property
    def default_source(self):
        return self._default_source

    def get_source(self, source=None):
        """Return source if it's in sources, default_source if None."""
        if source is None:
            return self.default_source
        if source in self.sources:
            return source
        raise ValueError(f'Source can only be one of {self.sources}')

    def get_formula(self, source=None):
        """Return formula corresponding to source."""
        source = self.get_source(source=source)
        return self.formulas[source]


class RandomnessTest(Property):
    """Statistical test of a bit sequence, one source per test."""

    quantity = 'p-value'
    unit = '[-]'
    Formulas = NistFormulas

    def __call__(self, bits, source=None):
        """Calculate the p-value of a bit sequence.

        Parameters
        ----------
        - bits (array-like of 0/1): sequence to test
        - source (str, default None): test name (see self.sources), if None
          the frequency (monobit) test is used.

        Output
        ------
        p-value in [0, 1] (float)

        Attributes
        ----------
        .sources --- names of available tests
        .default_source --- test used if None provided
        """
        bits = format_bits(bits)
        formula = self.get_formula(source=source)
        formula.check_validity_range('length', value=bits.size)
        return format_output_type(formula.calculate(bits))

    def statistic(self, bits, source=None):
        """Raw test statistic (e.g. s_obs, chi-square, number of runs, z)."""
        bits = format_bits(bits)
        return self.get_formula(source=source).statistic(bits)


class SubBytesProperty(Property):
    """AES SubBytes, with a table-driven and a table-free source."""

    quantity = 'SubBytes'
    unit = '[byte]'
    Formulas = SubBytesFormulas

    @property
    def default_source(self):
        if CONFIG["constant time sbox"]:
            return 'algebraic'
        return self._default_source

    def __call__(self, state, inverse=False, source=None):
        """Apply the (inverse) S-box to every byte of state (uint8 array)."""
        formula = self.get_formula(source=source)
        return formula.calculate(np.asarray(state, dtype=np.uint8), inverse=inverse)


nist_test = RandomnessTest()
sub_bytes = SubBytesProperty()
