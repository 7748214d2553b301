"""
Published full-scale results, kept as documentation and for arithmetic checks. None of these can
be reproduced without the original clinical dataset.
"""

# multi-class model, 502 test images over 92 syndromes
MULTICLASS_TOPK = {1: 0.600, 5: 0.837, 10: 0.910}
MULTICLASS_PERMUTATION = {1: (0.030, 0.0073), 5: (0.104, 0.0127), 10: (0.178, 0.0155)}  # (mean, sd)
MULTICLASS_TEST_IMAGES = 502

# top-5 accuracy per region expert and for the aggregated model
REGION_TOP5 = {
    "Eyes": 0.6036,
    "Nose": 0.6494,
    "FullFace": 0.7749,
    "Aggregated": 0.8370,
}

# binary experiments
CDLS_ACCURACY = 31 / 32
CDLS_CORRECT, CDLS_TOTAL = 31, 32
ANGELMAN_COUNTS = {"tp": 8, "fn": 2, "tn": 15, "fp": 0}

# specialized genotype model: 25 held-out images, five per gene
SPECIALIZED_GENES = ("PTPN11", "SOS1", "RAF1", "RIT1", "KRAS")
SPECIALIZED_CORRECT, SPECIALIZED_TOTAL = 16, 25
SPECIALIZED_CHANCE = 1 / len(SPECIALIZED_GENES)

# earlier results on the same test sets, for error-rate reduction arithmetic
CDLS_EXPERT_ACCURACY = 0.75
CDLS_PRIOR_METHOD_ACCURACY = 0.87
ANGELMAN_EXPERT_ACCURACY = 0.71
ANGELMAN_EXPERT_SENSITIVITY = 0.60
ANGELMAN_EXPERT_SPECIFICITY = 0.78
ANGELMAN_ERROR_RATE_REDUCTION_FLOOR = 0.72
