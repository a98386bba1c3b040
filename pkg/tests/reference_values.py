"""Published reference values used by the tests."""

# load -> (kappa_ins, m_ins, kappa_ann, m_ann), pricing rate 2%, calibration age 65
LOAD_FACTORS = {
    0.00: (1.0000, 88.23, 1.0000, 88.23),
    0.02: (1.1482, 86.93, 1.0678, 88.85),
    0.04: (1.3264, 85.58, 1.1434, 89.49),
    0.06: (1.5426, 84.16, 1.2280, 90.16),
    0.08: (1.8081, 82.67, 1.3232, 90.86),
    0.10: (2.1381, 81.10, 1.4306, 91.59),
    0.12: (2.5547, 79.43, 1.5527, 92.36),
    0.14: (3.0903, 77.65, 1.6921, 93.16),
    0.16: (3.7941, 75.72, 1.8523, 94.01),
    0.18: (4.7446, 73.63, 2.0377, 94.91),
    0.20: (6.0742, 71.31, 2.2537, 95.85),
}

# annuity demand in $100s/year, wealth 500,000 at 65, luxury bequests
DEMAND_AGES = (65, 70, 75, 80, 85, 90)
ANNUITY_DEMAND = {
    0.00: (22.1, 32.4, 46.0, 62.9, 82.4, 102.8),
    0.02: (18.3, 26.2, 35.7, 45.9, 54.2, 56.0),
    0.04: (14.7, 20.2, 25.9, 29.8, 28.0, 13.8),
    0.06: (11.2, 14.5, 16.6, 14.8, 4.0, 0.0),
    0.08: (7.9, 9.1, 7.9, 0.9, 0.0, 0.0),
    0.10: (4.8, 4.0, 0.0, 0.0, 0.0, 0.0),
    0.12: (1.9, 0.0, 0.0, 0.0, 0.0, 0.0),
    0.14: (0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
}

# Gompertz fits to the pooled 2019 G12 tables: least squares, likelihood, blend
G12_FITS = {"lsq": (9.45, 88.79), "mle": (9.35, 88.05), "blend": (9.38, 88.23)}

INCOME_COEFFICIENTS = (-0.000763, 0.0398, 10.65)
