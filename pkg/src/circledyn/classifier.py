"""Verdict synthesis: the real-multiplier dichotomy and the circle-case
analysis (completely invariant circle / invariant interval / Cantor-in-
interval), with exceptional-map recognition and critical-escape bookkeeping.

Conventions: the interval I lives in normalized coordinates where the
invariant circle is the extended real line and the distinguished fixed point
x0 sits at infinity; its right endpoint may legitimately be infinite when
the Julia set accumulates at a parabolic point there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .algebra import (
    INF,
    Moebius,
    Poly,
    RationalMap,
    SpherePoint,
    chordal_distance,
    conjugate,
    critical_points,
)
from .dynamics import (
    julia_cloud,
    periodic_points,
    preimage_points,
    real_multiplier_test,
)
from .errors import (
    DegenerateCloud,
    DegeneratePoints,
    DegreeCapExceeded,
    RootFindingFailed,
)
from .geometry import (
    CIRCLE_ACCEPT_RESIDUAL,
    GeneralizedCircle,
    best_circle,
    containment_residual,
    invariance_check,
    normalize_to_real_line,
)

POSTCRITICAL_DEPTH = 60
CYCLE_MATCH_TOL = 1e-7
LANDING_APPROACH_VETO = 1e-3
PARABOLIC_BAND = 1e-9
ESCAPE_CAP = 200

LATTES_SIGNATURES = {(2, 2, 2, 2), (2, 4, 4), (3, 3, 3), (2, 3, 6)}


# ---------------------------------------------------------------------------
# postcritical analysis


@dataclass
class PostcriticalAnalysis:
    critical: list  # (SpherePoint, local degree)
    orbits: list  # forward orbit segments per critical point
    finite: bool
    postcritical_set: list
    cycles: list  # list of cycles (lists of SpherePoints)
    cycle_has_critical: list
    ramification: dict = None  # postcritical point index -> nu (None = infinite)
    orbifold_signature: tuple = None


def _snap(p: SpherePoint, known: list) -> SpherePoint:
    for q in known:
        if chordal_distance(p, q) <= 1e-9:
            return q
    return p


def _step_with_pole_snap(f: RationalMap, p: SpherePoint, den_roots) -> SpherePoint:
    """One forward step; points within rounding reach of a pole go to
    infinity exactly, so postcritical orbits land instead of exploding."""
    if not p.infinite and den_roots.size:
        dist = np.abs(den_roots - p.value)
        j = int(np.argmin(dist))
        if dist[j] <= 1e-8 * max(1.0, abs(den_roots[j])):
            return INF
    return f(p)


def postcritical_analysis(f: RationalMap, depth: int = POSTCRITICAL_DEPTH) -> PostcriticalAnalysis:
    """Forward orbits of all critical points with cycle detection.

    A cycle landing is only believed when the orbit arrives abruptly (or
    exactly): orbits that creep up on an attracting cycle are reported as
    non-finite, since they converge without ever landing.
    """
    from .roots import all_roots

    crit_raw = critical_points(f)
    # local degree at a critical point = 1 + Wronskian multiplicity
    crit = []
    seen = []
    for p in crit_raw:
        matched = False
        for k, q in enumerate(seen):
            if chordal_distance(p, q) <= 1e-9:
                crit[k] = (crit[k][0], crit[k][1] + 1)
                matched = True
                break
        if not matched:
            seen.append(p)
            crit.append((p, 2))

    den_roots = np.zeros(0, dtype=complex)
    if f.den.degree >= 1:
        den_roots = all_roots(f.den, 1e-12).roots

    known_points: list = []
    orbits = []
    cycles = []
    all_landed = True
    for start, _deg in crit:
        orbit = [_snap(start, known_points)]
        if orbit[0] not in known_points:
            known_points.append(orbit[0])
        landed = False
        for _ in range(depth):
            nxt = _step_with_pole_snap(f, orbit[-1], den_roots)
            nxt = _snap(nxt, known_points)
            if nxt not in known_points:
                known_points.append(nxt)
            # recurrence?
            hit = None
            for j, prev in enumerate(orbit):
                if chordal_distance(nxt, prev) <= CYCLE_MATCH_TOL:
                    hit = j
                    break
            orbit.append(nxt)
            if hit is not None:
                entry_ok = _abrupt_entry(orbit, hit, len(orbit) - 1)
                if entry_ok:
                    cyc = orbit[hit : len(orbit) - 1]
                    cycles.append(cyc)
                    landed = True
                break
        orbits.append(orbit)
        if not landed:
            all_landed = False

    # deduplicate cycles
    uniq_cycles = []
    for cyc in cycles:
        merged = False
        for known in uniq_cycles:
            if any(
                chordal_distance(a, b) <= CYCLE_MATCH_TOL for a in cyc for b in known
            ):
                merged = True
                break
        if not merged:
            uniq_cycles.append(cyc)

    post = []
    for orbit in orbits:
        for p in orbit[1:]:
            if not any(chordal_distance(p, q) <= CYCLE_MATCH_TOL for q in post):
                post.append(p)
    post.sort(key=lambda p: p.sort_key())

    cycle_has_critical = []
    for cyc in uniq_cycles:
        has = any(
            chordal_distance(c, p) <= 1e-7 for c, _ in crit for p in cyc
        )
        cycle_has_critical.append(has)

    analysis = PostcriticalAnalysis(
        critical=crit,
        orbits=orbits,
        finite=all_landed,
        postcritical_set=post,
        cycles=uniq_cycles,
        cycle_has_critical=cycle_has_critical,
    )
    if all_landed:
        _compute_orbifold(f, analysis)
    return analysis


def _abrupt_entry(orbit, hit_index, close_index) -> bool:
    """A landing is believed only when the point before the cycle entry was
    still far from the cycle: orbits creeping up on an attracting cycle
    (including blow-up toward a superattracting infinity) never land."""
    if hit_index == 0:
        return True
    prev = orbit[hit_index - 1]
    prev_dist = min(
        chordal_distance(prev, orbit[j]) for j in range(hit_index, close_index)
    )
    return prev_dist > LANDING_APPROACH_VETO


def _compute_orbifold(f: RationalMap, analysis: PostcriticalAnalysis):
    """Ramification function on the postcritical set by lcm propagation."""
    post = analysis.postcritical_set
    crit = analysis.critical
    d = f.degree
    # preimage structure of each postcritical point
    pre = []
    for y in post:
        # local degree at w = number of preimages clustered at w
        clustered = []
        for w in preimage_points(f, y):
            placed = False
            for item in clustered:
                if chordal_distance(w, item[0]) <= 1e-6:
                    item[1] += 1
                    placed = True
                    break
            if not placed:
                clustered.append([w, 1])
        pre.append(clustered)

    nu = [1] * len(post)
    CAP = 64
    for _ in range(3 * len(post) + 8):
        changed = False
        for i, y in enumerate(post):
            val = 1
            for w, e in pre[i]:
                nw = 1
                for j, q in enumerate(post):
                    if chordal_distance(w, q) <= 1e-6:
                        nw = nu[j]
                        break
                contrib = None if nw is None else e * nw
                if contrib is None or (val is not None and contrib > CAP):
                    val = None
                    break
                val = _lcm(val, contrib)
                if val > CAP:
                    val = None
                    break
            if val != nu[i]:
                nu[i] = val
                changed = True
        if not changed:
            break
    analysis.ramification = {i: nu[i] for i in range(len(post))}
    finite_sig = tuple(sorted(v for v in nu if v is not None and v > 1))
    if any(v is None for v in nu):
        analysis.orbifold_signature = None
    else:
        analysis.orbifold_signature = finite_sig


def _lcm(a, b):
    return a * b // math.gcd(a, b)


# ---------------------------------------------------------------------------
# exceptional recognition


def detect_exceptional(f: RationalMap, analysis: PostcriticalAnalysis = None) -> str:
    """One of POWER, CHEBYSHEV, LATTES, NONE."""
    if analysis is None:
        analysis = postcritical_analysis(f)
    if not analysis.finite:
        return "NONE"
    d = f.degree
    ram = [(p, deg) for p, deg in analysis.critical if deg == d]

    def orbit_of(p, steps):
        out = [p]
        for _ in range(steps):
            out.append(f(out[-1]))
        return out

    # POWER: two totally ramified points forming an invariant pair
    if len(ram) == 2:
        pair = [ram[0][0], ram[1][0]]
        ok = True
        for p in pair:
            img = f(p)
            if not any(chordal_distance(img, q) <= 1e-7 for q in pair):
                ok = False
        if ok:
            return "POWER"

    # CHEBYSHEV: one totally ramified fixed/2-periodic point; the rest of the
    # postcritical set is an invariant pair of finite-plane points
    periodic_ram = []
    for p, _deg in ram:
        orb = orbit_of(p, 2)
        if chordal_distance(orb[1], p) <= 1e-7 or chordal_distance(orb[2], p) <= 1e-7:
            periodic_ram.append(p)
    if len(periodic_ram) == 1:
        t = periodic_ram[0]
        t_cycle = [t, f(t)]
        rest = [
            p
            for p in analysis.postcritical_set
            if not any(chordal_distance(p, q) <= 1e-7 for q in t_cycle)
        ]
        finite_rest = [p for p in rest if not p.infinite]
        if len(rest) == 2 and len(finite_rest) == 2:
            ok = True
            for p in rest:
                img = f(p)
                if not any(chordal_distance(img, q) <= 1e-7 for q in rest):
                    ok = False
                # the invariant endpoint pair carries no critical point
                # (a superattracting pair signals a different map class)
                if any(chordal_distance(p, c) <= 1e-7 for c, _ in analysis.critical):
                    ok = False
            if ok:
                return "CHEBYSHEV"

    # LATTES: no totally ramified periodic point, critical-free postcritical
    # cycles, and a flat orbifold signature
    if not periodic_ram and not ram:
        if analysis.cycles and not any(analysis.cycle_has_critical):
            sig = analysis.orbifold_signature
            if sig in LATTES_SIGNATURES:
                return "LATTES"
    return "NONE"


def lattes_doubling_map(g2: float = 4.0, g3: float = 0.0) -> RationalMap:
    """Degree-4 rational map induced by doubling on y^2 = 4x^3 - g2 x - g3
    (the classical duplication formula for the Weierstrass function)."""
    x = Poly([0.0, 1.0])
    wp2 = Poly([-g3, -g2, 0.0, 4.0])  # (P')^2 = 4x^3 - g2 x - g3
    half_wpp = Poly([-g2 / 2.0, 0.0, 6.0])  # P'' = 6x^2 - g2/2
    num = half_wpp * half_wpp - Poly([0.0, 8.0]) * wp2
    den = Poly([4.0]) * wp2
    return RationalMap(num, den)


# ---------------------------------------------------------------------------
# classification report


VERDICTS = (
    "CIRCLE_CASE_I",
    "CIRCLE_CASE_II",
    "CIRCLE_CASE_III",
    "LATTES",
    "POWER_CONJUGATE",
    "CHEBYSHEV_CONJUGATE",
    "NO_REAL_STRUCTURE",
    "INCONCLUSIVE",
)


@dataclass
class ClassificationReport:
    verdict: str
    degree: int
    real_multiplier: dict = None
    circle: GeneralizedCircle = None
    circle_residual: float = None
    normalizer: Moebius = None
    swap_components: bool = None
    julia_is_circle: bool = None
    interval_I: tuple = None  # (a, b); b may be math.inf
    x0: SpherePoint = None
    lambda_x0: float = None
    escape_times: dict = None
    exceptional: str = None
    orbifold_signature: tuple = None
    inconclusive_reason: str = None
    residuals: dict = field(default_factory=dict)
    # non-serialized working data for follow-up computations
    normalized_map: RationalMap = None
    normalized_cloud: np.ndarray = None

    @property
    def exit_code(self) -> int:
        if self.verdict == "INCONCLUSIVE":
            return 3
        if self.verdict == "NO_REAL_STRUCTURE":
            return 4
        return 0

    def to_json_dict(self) -> dict:
        out = {"verdict": self.verdict, "degree": self.degree}
        if self.real_multiplier is not None:
            rm = dict(self.real_multiplier)
            rm.pop("table", None)
            out["real_multiplier"] = rm
        if self.circle is not None:
            out["circle"] = {
                "A": self.circle.A,
                "B": [self.circle.B.real, self.circle.B.imag],
                "C": self.circle.C,
            }
        if self.circle_residual is not None:
            out["circle_residual"] = self.circle_residual
        if self.normalizer is not None:
            m = self.normalizer
            out["normalizer"] = [
                [m.a.real, m.a.imag],
                [m.b.real, m.b.imag],
                [m.c.real, m.c.imag],
                [m.d.real, m.d.imag],
            ]
        if self.swap_components is not None:
            out["swap_components"] = self.swap_components
        if self.julia_is_circle is not None:
            out["julia_is_circle"] = self.julia_is_circle
        if self.interval_I is not None:
            a, b = self.interval_I
            out["interval_I"] = [a, "inf" if math.isinf(b) else b]
        if self.x0 is not None:
            out["x0"] = "inf" if self.x0.infinite else [self.x0.re, self.x0.im]
        if self.lambda_x0 is not None:
            out["lambda_x0"] = self.lambda_x0
        if self.escape_times is not None:
            out["escape_times"] = self.escape_times
        if self.exceptional is not None:
            out["exceptional"] = self.exceptional
        if self.orbifold_signature is not None:
            out["orbifold_signature"] = list(self.orbifold_signature)
        if self.inconclusive_reason is not None:
            out["inconclusive_reason"] = self.inconclusive_reason
        if self.residuals:
            out["residuals"] = self.residuals
        return out


# ---------------------------------------------------------------------------
# main verdicts


def _realified(g: RationalMap) -> RationalMap:
    """Zero rounding-level imaginary parts of a real-conjugatable map."""
    scale = max(
        float(np.max(np.abs(g.num.coeffs))), float(np.max(np.abs(g.den.coeffs)))
    )
    worst = max(
        float(np.max(np.abs(g.num.coeffs.imag))),
        float(np.max(np.abs(g.den.coeffs.imag))),
    )
    if worst > 1e-6 * scale:
        return g
    return RationalMap(g.num.coeffs.real, g.den.coeffs.real, reduce=False)


def dichotomy_verdict(
    f: RationalMap,
    n_max: int = 6,
    seed: int = 2024,
    cloud_size: int = 3000,
    tol: float = 1e-8,
) -> ClassificationReport:
    """Full dichotomy run: real-multiplier predicate, then circle fit, then
    the circle-case analysis or exceptional recognition."""
    rmt = real_multiplier_test(f, n_max, tol)
    if not rmt["passed"]:
        return ClassificationReport(
            verdict="NO_REAL_STRUCTURE", degree=f.degree, real_multiplier=rmt
        )
    cloud = julia_cloud(f, cloud_size, seed)
    anchors = _repelling_anchor_points(f)
    try:
        circle, residual = best_circle(cloud, anchors=anchors)
    except (DegenerateCloud, DegeneratePoints):
        circle, residual = None, math.inf
    if circle is not None and residual <= CIRCLE_ACCEPT_RESIDUAL:
        report = circle_case_classify(f, circle, cloud=cloud, rmt=rmt, seed=seed)
        report.circle_residual = residual
        return report
    analysis = postcritical_analysis(f)
    exc = detect_exceptional(f, analysis)
    if exc == "LATTES":
        return ClassificationReport(
            verdict="LATTES",
            degree=f.degree,
            real_multiplier=rmt,
            circle_residual=residual,
            exceptional=exc,
            orbifold_signature=analysis.orbifold_signature,
        )
    if exc in ("POWER", "CHEBYSHEV"):
        return ClassificationReport(
            verdict=f"{exc}_CONJUGATE",
            degree=f.degree,
            real_multiplier=rmt,
            circle_residual=residual,
            exceptional=exc,
        )
    return ClassificationReport(
        verdict="INCONCLUSIVE",
        degree=f.degree,
        real_multiplier=rmt,
        circle_residual=residual,
        exceptional=exc,
        inconclusive_reason=(
            "real multipliers hold but neither a containing circle nor a "
            "flat orbifold was resolved numerically"
        ),
    )


def _repelling_anchor_points(f: RationalMap):
    pts = []
    cache = {}
    for n in (1, 2):
        try:
            for orbit in periodic_points(f, n, cache=cache):
                if orbit.stability == "repelling":
                    pts.extend(orbit.points)
        except RootFindingFailed:
            pass
    return pts


def circle_case_classify(
    f: RationalMap,
    circle: GeneralizedCircle,
    cloud=None,
    rmt=None,
    seed: int = 2024,
    cloud_size: int = 3000,
) -> ClassificationReport:
    """Circle-case analysis for a map whose Julia set lies on the circle."""
    if cloud is None:
        cloud = julia_cloud(f, cloud_size, seed)
    residual = containment_residual(circle, cloud)
    crit = critical_points(f)
    crit_on_circle = [p for p in crit if circle.point_residual(p) <= 1e-6]
    inv = invariance_check(f, circle)

    report = ClassificationReport(
        verdict="INCONCLUSIVE",
        degree=f.degree,
        real_multiplier=rmt,
        circle=circle.normalized(),
        circle_residual=residual,
    )
    report.residuals["forward_invariance"] = inv["forward_residual"]
    report.residuals["complete_invariance"] = inv["preimage_residual"]

    m1 = normalize_to_real_line(circle)
    g = _realified(conjugate(f, m1))

    if not crit_on_circle or inv["completely_invariant"]:
        report.verdict = "CIRCLE_CASE_I"
        report.normalizer = m1
        xs, _ = _normalized_cloud_angles(m1, cloud)
        report.normalized_map = g
        report.normalized_cloud = xs
        report.julia_is_circle = _julia_fills_circle(f, circle)
        report.residuals["circle_gap_statistic"] = _max_circle_gap(
            _own_circle_angles(circle, cloud)
        )
        report.swap_components = _component_swap(g)
        return report

    # locate x0: a real fixed point with multiplier in [-1, 1]
    x0_g, lam = _select_x0(g)
    if x0_g is None:
        report.verdict = "INCONCLUSIVE"
        report.inconclusive_reason = "no real fixed point with multiplier in [-1, 1]"
        return report

    m_total = m1
    if not x0_g.infinite:
        shift = Moebius(0.0, -1.0, 1.0, -x0_g.value)  # x -> -1/(x - x0)
        m_total = shift.compose(m1)
        g = _realified(conjugate(f, m_total))
    report.normalizer = m_total
    report.x0 = _pullback_point(m_total, INF)
    report.lambda_x0 = float(lam.real)

    xs, _ = _normalized_cloud_angles(m_total, cloud)
    report.normalized_map = g
    report.normalized_cloud = xs
    a, b = _interval_hull(xs)
    a, b, endpoint_residual = _resolve_endpoints(g, a, b, xs)
    report.interval_I = (a, b)
    report.residuals["endpoint_invariance"] = endpoint_residual

    contained, margin = _image_in_interval(g, a, b)
    report.residuals["interval_image_margin"] = margin
    if contained:
        report.verdict = "CIRCLE_CASE_II"
    else:
        report.verdict = "CIRCLE_CASE_III"
    report.escape_times = critical_escape_times(f, report, ESCAPE_CAP)
    return report


def _normalized_cloud_angles(m: Moebius, cloud):
    xs = []
    angles = []
    for p in cloud:
        q = m(p)
        if q.infinite:
            xs.append(math.inf)
            angles.append(math.pi)
        else:
            xs.append(q.value.real)
            angles.append(2.0 * math.atan(q.value.real))
    return np.asarray(xs, dtype=float), np.asarray(angles, dtype=float)


def _own_circle_angles(circle: GeneralizedCircle, cloud) -> np.ndarray:
    """Angular coordinates of the cloud in the circle's own parametrization,
    in the original coordinates (a Moebius-normalized line would distort the
    gap statistic arbitrarily)."""
    norm = circle.normalized()
    out = []
    if norm.is_line:
        b = norm.B
        base = -norm.C * b / (2.0 * abs(b) ** 2)
        direction = 1j * b / abs(b)
        for p in cloud:
            if p.infinite:
                out.append(math.pi)
            else:
                t = ((p.value - base) / direction).real
                out.append(2.0 * math.atan(t))
    else:
        center = -norm.B / norm.A
        for p in cloud:
            if p.infinite:
                continue
            w = p.value - center
            out.append(math.atan2(w.imag, w.real))
    return np.asarray(out, dtype=float)


def _max_circle_gap(angles: np.ndarray) -> float:
    """Largest angular gap of the cloud in the circle's own parametrization
    (reported as corroborating evidence; the density of the sampling measure
    is not conjugation-invariant, so this is not used as the verdict)."""
    n = len(angles)
    if n < 2:
        return 2.0 * math.pi
    s = np.sort(angles)
    gaps = np.diff(s)
    wrap = (s[0] + 2.0 * math.pi) - s[-1]
    return max(float(np.max(gaps)), float(wrap))


def _julia_fills_circle(f: RationalMap, circle: GeneralizedCircle, n_max: int = 3) -> bool:
    """With the circle completely invariant, orbits of circle points stay on
    it, so a gap arc must be attracted to a non-repelling cycle lying on the
    circle: the Julia set is the whole circle exactly when no low-period
    non-repelling orbit sits on it."""
    cache = {}
    for n in range(1, n_max + 1):
        try:
            orbits = periodic_points(f, n, cache=cache)
        except (RootFindingFailed, DegreeCapExceeded):
            break
        for orbit in orbits:
            if orbit.stability == "repelling":
                continue
            if all(circle.point_residual(p) <= 1e-6 for p in orbit.points):
                return False
    return True


def _component_swap(g: RationalMap) -> bool:
    """Does the map exchange the two sides of the invariant line?  Tracked
    through the orbit of one off-line point."""
    z = SpherePoint.of(0.37 + 0.9j)
    w = g(z)
    if w.infinite or abs(w.value.imag) < 1e-12:
        z = SpherePoint.of(-0.21 + 1.3j)
        w = g(z)
        if w.infinite or abs(w.value.imag) < 1e-12:
            return False
    return (z.value.imag > 0) != (w.value.imag > 0)


def _real_fixed_points(g: RationalMap):
    """Real fixed points of a real map, infinity included when fixed."""
    out = []
    cache = {}
    for orbit in periodic_points(g, 1, cache=cache):
        p = orbit.points[0]
        if p.infinite:
            out.append((p, orbit.multiplier))
        elif abs(p.im) <= 1e-7 * (1.0 + abs(p.re)):
            out.append((SpherePoint.of(p.re), orbit.multiplier))
    return out


def _select_x0(g: RationalMap):
    candidates = []
    for p, lam in _real_fixed_points(g):
        if abs(lam.imag) <= 1e-6 and abs(lam.real) <= 1.0 + PARABOLIC_BAND:
            candidates.append((p, lam))
    if not candidates:
        return None, None
    if len(candidates) == 1:
        return candidates[0]
    # several admissible fixed points: follow the orbit of an off-line point
    z = SpherePoint.of(0.61 + 1.1j)
    for _ in range(400):
        z = g(z)
        for p, lam in candidates:
            if chordal_distance(z, p) <= 1e-6:
                return p, lam
    # fall back to the most attracting candidate
    candidates.sort(key=lambda t: (abs(t[1]), t[0].sort_key()))
    return candidates[0]


def _pullback_point(m: Moebius, p: SpherePoint) -> SpherePoint:
    return m.inverse()(p)


def _interval_hull(xs: np.ndarray):
    finite = xs[np.isfinite(xs)]
    if finite.size == 0:
        raise DegenerateCloud("no finite normalized cloud points")
    return float(np.min(finite)), float(np.max(finite))


def _resolve_endpoints(g: RationalMap, a: float, b: float, xs: np.ndarray):
    """Polish the rough hull onto an invariant endpoint pair {a, b}.

    Both a finite interval and one with its right endpoint at the
    distinguished fixed point at infinity are tried; a hypothesis is accepted
    when {g(a), g(b)} lands back in {a, b} and the cloud stays inside."""
    finite = xs[np.isfinite(xs)]
    span = max(1.0, b - a)
    candidates = []
    fa, fb = _polish_endpoints(g, a, b)
    candidates.append((fa, fb))
    a_inf = _polish_left_endpoint_with_infinite_partner(g, a, span)
    candidates.append((a_inf, math.inf))
    best = None
    for ca, cb in candidates:
        res = _endpoint_invariance_residual(g, ca, cb)
        contained = bool(
            np.all(finite >= ca - 1e-6 * span)
            and (math.isinf(cb) or np.all(finite <= cb + 1e-6 * span))
        )
        ok = contained and res <= 1e-9 * max(1.0, abs(ca), 0.0 if math.isinf(cb) else abs(cb))
        if ok:
            return ca, cb, res
        if best is None or res < best[2]:
            best = (ca, cb, res)
    return best


def _endpoint_invariance_residual(g: RationalMap, a: float, b: float) -> float:
    def image_dist(x):
        v = g(SpherePoint.of(x))
        dists = [chordal_distance(v, SpherePoint.of(a))]
        if math.isinf(b):
            dists.append(chordal_distance(v, INF))
        else:
            dists.append(chordal_distance(v, SpherePoint.of(b)))
        return min(dists)

    res = image_dist(a)
    if not math.isinf(b):
        res = max(res, image_dist(b))
    return res


def _polish_left_endpoint_with_infinite_partner(
    g: RationalMap, a: float, span: float
) -> float:
    """With the right endpoint at infinity, the left endpoint maps to itself
    or to infinity (then it is a pole)."""
    num, den = g.num, g.den
    fa = _real_eval(g, a)
    if math.isfinite(fa) and abs(fa - a) <= max(0.05 * span, 1e-9 * (1.0 + abs(a))):
        return _newton_real(
            lambda x: (num(x) - x * den(x)).real,
            lambda x: (num.deriv()(x) - den(x) - x * den.deriv()(x)).real,
            a,
        )
    if den.degree >= 1:
        return _newton_real(
            lambda x: den(x).real, lambda x: den.deriv()(x).real, a
        )
    return a


def _newton_real(fun, dfun, x0, tol=1e-13, steps=80):
    x = float(x0)
    for _ in range(steps):
        v = fun(x)
        d = dfun(x)
        if not math.isfinite(v) or not math.isfinite(d) or d == 0:
            return x0
        step = v / d
        x -= step
        if abs(step) <= tol * (1.0 + abs(x)):
            break
    return x


def _real_eval(g: RationalMap, x: float) -> float:
    p = g(SpherePoint.of(x))
    if p.infinite:
        return math.inf
    return p.value.real


def _polish_endpoints(g: RationalMap, a: float, b: float):
    """Push the rough hull endpoints onto the invariant pair {a, b}.

    Fixed endpoints are polished first; an endpoint mapping onto its partner
    is then solved against the partner's polished value, so the pair closes
    to full precision."""
    num, den = g.num, g.den

    def fixed_eq(x):
        return (num(x) - x * den(x)).real

    def fixed_deq(x):
        return (num.deriv()(x) - den(x) - x * den.deriv()(x)).real

    def polish_fixed(x):
        return _newton_real(fixed_eq, fixed_deq, x)

    def polish_preimage_of(x, target):
        return _newton_real(
            lambda t: (num(t) - target * den(t)).real,
            lambda t: (num.deriv()(t) - target * den.deriv()(t)).real,
            x,
        )

    scale = max(1.0, abs(a), abs(b))
    tol_match = max(0.05 * (b - a), 1e-9 * scale)
    fa, fb = _real_eval(g, a), _real_eval(g, b)

    def close(u, v):
        return math.isfinite(u) and abs(u - v) <= tol_match

    a_fixed, b_fixed = close(fa, a), close(fb, b)
    if not a_fixed and not b_fixed and close(fa, b) and close(fb, a):
        # genuine two-cycle: polish on the second iterate
        def cyc_eq(x):
            return _real_eval(g, _real_eval(g, x)) - x

        def cyc_deq(x):
            h = 1e-7 * scale
            return (cyc_eq(x + h) - cyc_eq(x - h)) / (2 * h)

        a2 = _newton_real(cyc_eq, cyc_deq, a)
        b2 = _real_eval(g, a2)
        return (a2, b2) if a2 < b2 else (b2, a2)
    if a_fixed:
        a = polish_fixed(a)
    if b_fixed:
        b = polish_fixed(b)
    if not a_fixed and close(fa, b):
        a = polish_preimage_of(a, b)
    if not b_fixed and close(fb, a):
        b = polish_preimage_of(b, a)
    return a, b


def _image_in_interval(g: RationalMap, a: float, b: float):
    """Does g([a, b]) stay inside [a, b] (with the right endpoint possibly
    infinite)?  Returns (contained, signed margin of the worst excursion)."""
    upper = b if math.isfinite(b) else max(10.0 * (abs(a) + 1.0), a + 1e6)
    grid = np.linspace(a, upper, 4097)
    xs = list(grid)
    for p, _deg in _real_critical_points(g):
        if a <= p <= upper:
            xs.append(p)
    tol = 1e-7 * max(1.0, abs(a), abs(upper))
    worst = 0.0
    for x in xs:
        v = _real_eval(g, x)
        if math.isinf(v):
            if math.isinf(b) and v > 0:
                continue
            worst = max(worst, math.inf)
            continue
        if v < a - 1e-12:
            worst = max(worst, a - v)
        if math.isfinite(b) and v > b + 1e-12:
            worst = max(worst, v - b)
    return worst <= tol, worst


def _real_critical_points(g: RationalMap):
    out = []
    for p in critical_points(g):
        if not p.infinite and abs(p.im) <= 1e-7 * (1.0 + abs(p.re)):
            out.append((p.re, 2))
    return out


def critical_escape_times(f: RationalMap, report: ClassificationReport, cap: int = ESCAPE_CAP) -> dict:
    """Least N with g^N(critical point) outside the open interval, for each
    real critical point of the normalized map inside I; orbit landings on a
    cycle are tagged preperiodic."""
    if report.interval_I is None or report.normalized_map is None:
        raise ValueError("escape times need a classified interval")
    g = report.normalized_map
    a, b = report.interval_I
    tol = 1e-9 * max(1.0, abs(a), 0.0 if math.isinf(b) else abs(b))
    out = {}
    for x, _deg in _real_critical_points(g):
        if not (a - 1e-9 <= x and (math.isinf(b) or x <= b + 1e-9)):
            continue
        key = repr(round(float(x), 12))
        orbit = [x]
        n_escape = None
        preperiodic = False
        for n in range(1, cap + 1):
            v = _real_eval(g, orbit[-1])
            orbit.append(v)
            inside = (a + tol < v) and (math.isinf(b) or v < b - tol)
            if n_escape is None and (not math.isfinite(v) or not inside):
                n_escape = n
            if math.isfinite(v) and any(
                abs(v - u) <= 1e-7 * (1.0 + abs(v)) for u in orbit[:-1]
            ):
                preperiodic = True
                break
            if not math.isfinite(v):
                break
            if n_escape is not None and n > n_escape + 4:
                break
        entry = {"N": n_escape, "preperiodic": preperiodic}
        if n_escape is None:
            entry["escape_cap_exceeded"] = cap
        out[key] = entry
    return out
