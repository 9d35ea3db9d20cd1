# Lebedev-Laikov generator orbits, keyed by number of points.
#
# Each entry is (orbit kind, weight, *parameters). Kinds follow the usual
# octahedral orbit naming:
#   a1  (1,0,0)                 6 points
#   a2  (0,1,1)/sqrt(2)        12 points
#   a3  (1,1,1)/sqrt(3)         8 points
#   b   (l,l,m), m=sqrt(1-2l^2)     24 points
#   c   (p,q,0), q=sqrt(1-p^2)      24 points
#   d   (r,s,t), t=sqrt(1-r^2-s^2)  48 points
# Weights are normalized to sum to one.

LEBEDEV_ORBITS = {
    6: [("a1", 0.1666666666666667)],
    14: [("a1", 0.06666666666666667), ("a3", 0.07500000000000000)],
    26: [
        ("a1", 0.04761904761904762),
        ("a2", 0.03809523809523810),
        ("a3", 0.03214285714285714),
    ],
    38: [
        ("a1", 0.009523809523809524),
        ("a3", 0.03214285714285714),
        ("c", 0.02857142857142857, 0.4597008433809831),
    ],
    50: [
        ("a1", 0.01269841269841270),
        ("a2", 0.02257495590828924),
        ("a3", 0.02109375000000000),
        ("b", 0.02017333553791887, 0.3015113445777636),
    ],
    86: [
        ("a1", 0.01154401154401154),
        ("a3", 0.01194390908585628),
        ("b", 0.01111055571060340, 0.3696028464541502),
        ("b", 0.01187650129453714, 0.6943540066026664),
        ("c", 0.01181230374690448, 0.3742430390903412),
    ],
    110: [
        ("a1", 0.003828270494937162),
        ("a3", 0.009793737512487512),
        ("b", 0.008211737283191111, 0.1851156353447362),
        ("b", 0.009942814891178103, 0.6904210483822922),
        ("b", 0.009595471336070963, 0.3956894730559419),
        ("c", 0.009694996361663028, 0.4783690288121502),
    ],
    146: [
        ("a1", 0.0005996313688621381),
        ("a2", 0.007372999718620756),
        ("a3", 0.007210515360144488),
        ("b", 0.007116355493117555, 0.6764410400114264),
        ("b", 0.006753829486314477, 0.4174961227965453),
        ("b", 0.007574394159054034, 0.1574676672039082),
        ("d", 0.006991087353303262, 0.1403553811713183, 0.4493328323269557),
    ],
    194: [
        ("a1", 0.001782340447244611),
        ("a2", 0.005716905949977102),
        ("a3", 0.005573383178848738),
        ("b", 0.005608704082587997, 0.6712973442695226),
        ("b", 0.005158237711805383, 0.2892465627575439),
        ("b", 0.005518771467273614, 0.4446933178717437),
        ("b", 0.004106777028169394, 0.1299335447650067),
        ("c", 0.005051846064614808, 0.3457702197611283),
        ("d", 0.005530248916233094, 0.1590417105383530, 0.8360360154824589),
    ],
}

# Highest spherical-harmonic degree integrated exactly by each rule.
LEBEDEV_DEGREE = {6: 3, 14: 5, 26: 7, 38: 9, 50: 11, 86: 15, 110: 17, 146: 19, 194: 23}
