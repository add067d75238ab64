"""Chemical element symbols for atomic numbers 1..118."""

from .errors import UnknownElement

SYMBOLS = (
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne",
    "Na", "Mg", "Al", "Si", "P", "S", "Cl", "Ar", "K", "Ca",
    "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn",
    "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr",
    "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn",
    "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd",
    "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb",
    "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg",
    "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th",
    "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk", "Cf", "Es", "Fm",
    "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds",
    "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og",
)

MAX_ATOMIC_NUMBER = len(SYMBOLS)

_NUMBERS = {symbol: index + 1 for index, symbol in enumerate(SYMBOLS)}


def symbol_to_number(symbol: str) -> int:
    """Return the atomic number for an element symbol (case-sensitive)."""
    try:
        return _NUMBERS[symbol]
    except KeyError:
        raise UnknownElement(f"unknown element symbol {symbol!r}") from None


def number_to_symbol(z: int) -> str:
    """Return the element symbol for atomic number ``z`` in 1..118."""
    if not 1 <= z <= MAX_ATOMIC_NUMBER:
        raise UnknownElement(f"atomic number {z} outside 1..{MAX_ATOMIC_NUMBER}")
    return SYMBOLS[z - 1]
