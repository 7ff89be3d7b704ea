//! Standard atomic weights (g/mol) for H through U.

const TABLE: [(&str, f64); 92] = [
    ("H", 1.008),
    ("He", 4.002_602),
    ("Li", 6.94),
    ("Be", 9.012_183),
    ("B", 10.81),
    ("C", 12.011),
    ("N", 14.007),
    ("O", 15.999),
    ("F", 18.998_403),
    ("Ne", 20.1797),
    ("Na", 22.989_769),
    ("Mg", 24.305),
    ("Al", 26.981_538),
    ("Si", 28.085),
    ("P", 30.973_762),
    ("S", 32.06),
    ("Cl", 35.45),
    ("Ar", 39.948),
    ("K", 39.0983),
    ("Ca", 40.078),
    ("Sc", 44.955_908),
    ("Ti", 47.867),
    ("V", 50.9415),
    ("Cr", 51.9961),
    ("Mn", 54.938_043),
    ("Fe", 55.845),
    ("Co", 58.933_194),
    ("Ni", 58.6934),
    ("Cu", 63.546),
    ("Zn", 65.38),
    ("Ga", 69.723),
    ("Ge", 72.630),
    ("As", 74.921_595),
    ("Se", 78.971),
    ("Br", 79.904),
    ("Kr", 83.798),
    ("Rb", 85.4678),
    ("Sr", 87.62),
    ("Y", 88.905_84),
    ("Zr", 91.224),
    ("Nb", 92.906_37),
    ("Mo", 95.95),
    ("Tc", 98.0),
    ("Ru", 101.07),
    ("Rh", 102.905_49),
    ("Pd", 106.42),
    ("Ag", 107.8682),
    ("Cd", 112.414),
    ("In", 114.818),
    ("Sn", 118.710),
    ("Sb", 121.760),
    ("Te", 127.60),
    ("I", 126.904_47),
    ("Xe", 131.293),
    ("Cs", 132.905_452),
    ("Ba", 137.327),
    ("La", 138.905_47),
    ("Ce", 140.116),
    ("Pr", 140.907_66),
    ("Nd", 144.242),
    ("Pm", 145.0),
    ("Sm", 150.36),
    ("Eu", 151.964),
    ("Gd", 157.25),
    ("Tb", 158.925_354),
    ("Dy", 162.500),
    ("Ho", 164.930_328),
    ("Er", 167.259),
    ("Tm", 168.934_218),
    ("Yb", 173.045),
    ("Lu", 174.9668),
    ("Hf", 178.49),
    ("Ta", 180.947_88),
    ("W", 183.84),
    ("Re", 186.207),
    ("Os", 190.23),
    ("Ir", 192.217),
    ("Pt", 195.084),
    ("Au", 196.966_570),
    ("Hg", 200.592),
    ("Tl", 204.38),
    ("Pb", 207.2),
    ("Bi", 208.980_40),
    ("Po", 209.0),
    ("At", 210.0),
    ("Rn", 222.0),
    ("Fr", 223.0),
    ("Ra", 226.0),
    ("Ac", 227.0),
    ("Th", 232.0377),
    ("Pa", 231.035_88),
    ("U", 238.028_91),
];

/// Atomic weight in g/mol, matched case-insensitively.
pub fn atomic_mass(symbol: &str) -> Option<f64> {
    TABLE
        .iter()
        .find(|(s, _)| s.eq_ignore_ascii_case(symbol))
        .map(|&(_, m)| m)
}

/// Atomic number, matched case-insensitively.
pub fn atomic_number(symbol: &str) -> Option<u32> {
    TABLE
        .iter()
        .position(|(s, _)| s.eq_ignore_ascii_case(symbol))
        .map(|i| i as u32 + 1)
}

/// Canonical capitalisation of an element symbol.
pub fn canonical_symbol(symbol: &str) -> Option<&'static str> {
    TABLE
        .iter()
        .find(|(s, _)| s.eq_ignore_ascii_case(symbol))
        .map(|&(s, _)| s)
}
