"""Reference values for the acceptance suite.

Distortion/accuracy pairs of the large-file-limit curves at rates 2 and
4 for the four-file Gaussian benchmark (sigma 3), and the four
compression-based points per rate.
"""

SHANNON_R2 = [
    (0.5625, 1),
    (0.63093025, 0.975),
    (0.70185587, 0.95),
    (0.77508607, 0.925),
    (0.85044671, 0.9),
    (0.927779, 0.875),
    (1.0069382, 0.85),
    (1.0877922, 0.825),
    (1.1702205, 0.8),
    (1.2541132, 0.775),
    (1.3393696, 0.75),
    (1.4258979, 0.725),
    (1.5136135, 0.7),
    (1.6024394, 0.675),
    (1.6923045, 0.65),
    (1.7831435, 0.625),
    (1.8748963, 0.6),
    (1.9675076, 0.575),
    (2.0609262, 0.55),
    (2.1551049, 0.525),
    (2.25, 0.5),
    (2.25, 0.5),
    (2.3158266, 0.49166667),
    (2.3816912, 0.48333333),
    (2.4475911, 0.475),
    (2.513524, 0.46666667),
    (2.579488, 0.45833333),
    (2.645481, 0.45),
    (2.7115013, 0.44166667),
    (2.7775473, 0.43333333),
    (2.8436175, 0.425),
    (2.9097105, 0.41666667),
    (2.9758249, 0.40833333),
    (3.0419597, 0.4),
    (3.1081137, 0.39166667),
    (3.1742859, 0.38333333),
    (3.2404754, 0.375),
    (3.3066812, 0.36666667),
    (3.3729026, 0.35833333),
    (3.4391387, 0.35),
    (3.5053888, 0.34166667),
    (3.5716524, 0.33333333),
    (3.5716524, 0.33333333),
    (3.61772, 0.32916667),
    (3.663836, 0.325),
    (3.7099977, 0.32083333),
    (3.756203, 0.31666667),
    (3.8024496, 0.3125),
    (3.8487357, 0.30833333),
    (3.8950592, 0.30416667),
    (3.9414184, 0.3),
    (3.9878116, 0.29583333),
    (4.0342374, 0.29166667),
    (4.0806943, 0.2875),
    (4.1271808, 0.28333333),
    (4.1736957, 0.27916667),
    (4.2202377, 0.275),
    (4.2668057, 0.27083333),
    (4.3133987, 0.26666667),
    (4.3600156, 0.2625),
    (4.4066553, 0.25833333),
    (4.4533171, 0.25416667),
    (4.5, 0.25),
]

SHANNON_R4 = [
    (0.03515625, 1),
    (0.044998746, 0.975),
    (0.056440832, 0.95),
    (0.06954871, 0.925),
    (0.084375, 0.9),
    (0.10095982, 0.875),
    (0.11933193, 0.85),
    (0.13950995, 0.825),
    (0.16150352, 0.8),
    (0.1853144, 0.775),
    (0.2109375, 0.75),
    (0.23836189, 0.725),
    (0.2675716, 0.7),
    (0.29854646, 0.675),
    (0.33126277, 0.65),
    (0.36569391, 0.625),
    (0.40181089, 0.6),
    (0.43958286, 0.575),
    (0.47897746, 0.55),
    (0.51996126, 0.525),
    (0.5625, 0.5),
    (0.5625, 0.5),
    (0.59886709, 0.49166667),
    (0.63605545, 0.48333333),
    (0.67403594, 0.475),
    (0.71278044, 0.46666667),
    (0.75226191, 0.45833333),
    (0.79245429, 0.45),
    (0.83333254, 0.44166667),
    (0.87487258, 0.43333333),
    (0.9170513, 0.425),
    (0.95984649, 0.41666667),
    (1.0032368, 0.40833333),
    (1.0472018, 0.4),
    (1.0917219, 0.39166667),
    (1.1367781, 0.38333333),
    (1.1823523, 0.375),
    (1.2284274, 0.36666667),
    (1.2749864, 0.35833333),
    (1.3220135, 0.35),
    (1.3694934, 0.34166667),
    (1.4174112, 0.33333333),
    (1.4174112, 0.33333333),
    (1.4576106, 0.32916667),
    (1.4979945, 0.325),
    (1.5385561, 0.32083333),
    (1.5792888, 0.31666667),
    (1.6201865, 0.3125),
    (1.6612433, 0.30833333),
    (1.7024535, 0.30416667),
    (1.7438118, 0.3),
    (1.7853129, 0.29583333),
    (1.8269522, 0.29166667),
    (1.8687247, 0.2875),
    (1.9106262, 0.28333333),
    (1.9526522, 0.27916667),
    (1.9947987, 0.275),
    (2.0370618, 0.27083333),
    (2.0794378, 0.26666667),
    (2.1219229, 0.2625),
    (2.1645139, 0.25833333),
    (2.2072073, 0.25416667),
    (2.25, 0.25),
]

COMPRESSION_R2 = [
    (0.918464, 1.0),
    (2.97739, 0.5),
    (4.39277, 1 / 3),
    (5.32161, 0.25),
]

COMPRESSION_R4 = [
    (0.0720998, 1.0),
    (0.827231, 0.5),
    (1.88223, 1 / 3),
    (2.83216, 0.25),
]
