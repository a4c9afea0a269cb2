"""``bectomo`` command-line driver.

Subcommands: make-state, simulate, reconstruct, error-curve, validate, run.

Exit codes: 0 success, 2 usage error, 3 validation failure (bad input,
invariant violation, theta mismatch), 4 balanced-beamsplitter refusal,
5 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import io
from .errors import BalancedBeamsplitter, FormatError, ThetaMismatch, TomographyError
from .forward import PhaseGrid, ProbabilitySurface, probability_surface
from .noise import NOISE_MODELS, NoiseSpec
from .reconstruction import DEFAULT_THETA, ReconstructionConfig, clip_to_psd, error_report, reconstruct
from .states import (
    CoherentSpinParams,
    TwoModeDensityMatrix,
    coherent_projected_state,
    density_from_mixture,
    fock_product_state,
    per_diagonal_distance,
    state_distance,
)
from .su2 import AngularMomentumGeometry

log = logging.getLogger("bectomo")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_BALANCED = 4
EXIT_IO = 5


class ValidationFailed(Exception):
    pass


def _theta_line(theta: float) -> str:
    return f"theta={theta:.17g} (transmission cos^2 theta={math.cos(theta) ** 2:.6f})"


def _manifest(args) -> Optional[io.ExperimentManifest]:
    path = getattr(args, "manifest", None)
    return io.ExperimentManifest.load(path) if path else None


def _pick(value, fallback):
    return fallback if value is None else value


# ---------------------------------------------------------------- make-state


def _build_pure(geometry, kind, params: dict, relative_phase=False):
    if kind == "coherent":
        cp = CoherentSpinParams(float(params["theta_state"]), float(params.get("phi_state", 0.0)))
        return coherent_projected_state(geometry, cp, relative_phase=relative_phase)
    if kind == "fock":
        return fock_product_state(geometry, int(params["n1"]))
    raise ValidationFailed(f"unknown pure-state kind {kind!r}")


def parse_mixture(path, geometry):
    """Mixture spec: one component per line, ``<weight> coherent theta_state=.. phi_state=..``,
    ``<weight> fock n1=..`` or ``<weight> file <state file>``."""
    components = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) < 2:
            raise ValidationFailed(f"{path}:{lineno}: expected '<weight> <kind> ...'")
        weight, kind, rest = float(tokens[0]), tokens[1], tokens[2:]
        if kind == "file":
            sf = io.read_state(Path(path).parent / rest[0])
            if sf.kind != "pure":
                raise ValidationFailed(f"{path}:{lineno}: mixture components must be pure states")
            state = sf.pure
        else:
            params = dict(tok.split("=", 1) for tok in rest)
            state = _build_pure(geometry, kind, params, params.pop("relative_phase", "0") in ("1", "true"))
        components.append((weight, state))
    return components


def make_state(spec: dict, base_dir: Path = Path(".")) -> io.StateFile:
    n = int(spec["n"])
    geometry = AngularMomentumGeometry(n)
    kind = spec["kind"]
    payload = {"step": "make-state", **spec}
    if kind == "mixed":
        mix_path = Path(spec["spec"])
        if not mix_path.is_absolute():
            mix_path = base_dir / mix_path
        payload.pop("spec")
        payload["spec_text"] = mix_path.read_text()
        rho = density_from_mixture(parse_mixture(mix_path, geometry))
        return io.StateFile(geometry, "mixed", density=rho, digest=io.digest(payload))
    pure = _build_pure(geometry, kind, spec, bool(spec.get("relative_phase", False)))
    meta = {"source": kind}
    return io.StateFile(geometry, "pure", pure=pure, digest=io.digest(payload), meta=meta)


def cmd_make_state(args) -> int:
    manifest = _manifest(args)
    spec = dict(manifest.state) if manifest else {}
    spec["kind"] = _pick(args.kind, spec.get("kind"))
    spec["n"] = _pick(args.n, manifest.n if manifest else None)
    for key in ("theta_state", "phi_state", "n1", "spec"):
        val = getattr(args, key)
        if val is not None:
            spec[key] = val
    if args.relative_phase:
        spec["relative_phase"] = True
    if spec.get("kind") is None or spec.get("n") is None:
        raise ValidationFailed("make-state needs --kind and --n (or a manifest)")
    if spec["kind"] == "coherent" and "theta_state" not in spec:
        raise ValidationFailed("coherent state needs --theta-state")
    if spec["kind"] == "fock" and "n1" not in spec:
        raise ValidationFailed("fock state needs --n1")
    if spec["kind"] == "mixed" and "spec" not in spec:
        raise ValidationFailed("mixed state needs --spec")
    state = make_state(spec)
    if manifest:
        state.meta["manifest"] = manifest.digest
    io.write_state(args.out, state)
    print(f"wrote {state.kind} state N={spec['n']} to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------- simulate


def simulate(state: io.StateFile, theta: float, phases: int, noise: NoiseSpec) -> ProbabilitySurface:
    exact = probability_surface(state.to_density(), theta, PhaseGrid(phases))
    return noise.apply(exact)


def cmd_simulate(args) -> int:
    manifest = _manifest(args)
    theta = _pick(args.theta, manifest.theta if manifest else DEFAULT_THETA)
    phases = _pick(args.phases, manifest.phases if manifest else 180)
    mnoise = manifest.noise if manifest else {}
    model = _pick(args.noise, mnoise.get("model", "gaussian"))
    tau = _pick(args.trials, mnoise.get("tau", 2000))
    seed = _pick(args.seed, mnoise.get("seed", 0))
    noise = NoiseSpec(model, int(tau) if model != "exact" else 0, int(seed))
    state = io.read_state(args.state)
    surface = simulate(state, theta, phases, noise)
    payload = {
        "step": "simulate", "state": state.digest, "theta": theta, "phases": phases,
        "noise": {"model": model, "tau": noise.trials_per_phase, "seed": noise.seed},
        "manifest": manifest.digest if manifest else None,
    }
    io.write_surface(args.out, surface, io.digest(payload))
    print(f"wrote {surface.geometry.dimension}x{phases} surface ({model}) to {args.out}; {_theta_line(theta)}")
    return EXIT_OK


# ---------------------------------------------------------------- reconstruct


def _lambda_arg(text):
    if text is None or text == "auto":
        return text
    return float(text)


def run_reconstruction(surface, header, config, truth=None, clip=False):
    rho, report = reconstruct(surface, config)
    if clip:
        rho = clip_to_psd(rho)
        report.clip_psd = True
    extra = {"surface_digest": header.get("digest", "none")}
    if truth is not None:
        report.attach_truth(rho, truth)
        extra["distance_frobenius"] = state_distance(rho, truth)
    return rho, report, extra


def cmd_reconstruct(args) -> int:
    manifest = _manifest(args)
    mrec = manifest.reconstruction if manifest else {}
    surface, header = io.read_surface(args.surface)
    theta = _pick(args.theta, manifest.theta if manifest else surface.theta)
    guard = _pick(args.guard, mrec.get("guard", 1e-6))
    if abs(theta - math.pi / 4) < guard:
        raise BalancedBeamsplitter(f"{_theta_line(theta)} is a balanced beamsplitter; reconstruction refused")
    if abs(theta - surface.theta) > 1e-12:
        raise ThetaMismatch(f"--theta {theta!r} disagrees with surface header theta {surface.theta!r}")
    config = ReconstructionConfig(
        theta=theta,
        tikhonov_lambda=_pick(_lambda_arg(args.lam), mrec.get("lambda", 0.0)),
        max_diagonal=_pick(args.max_diagonal, mrec.get("max_diagonal")),
        balanced_guard=guard,
        workers=args.workers,
    )
    truth = io.read_state(args.truth).to_density() if args.truth else None
    clip = args.clip_psd or bool(mrec.get("clip_psd", False))
    rho, report, extra = run_reconstruction(surface, header, config, truth, clip)
    if manifest:
        extra["manifest"] = manifest.digest
    dig = io.digest({"step": "reconstruct", "surface": header.get("digest"), "config": repr(config), "clip": clip})
    io.write_state(args.out, io.StateFile(rho.geometry, "density", density=rho, digest=dig))
    io.write_report(args.report, report, {"digest": dig, **extra})
    print(f"reconstructed N={report.n}; {_theta_line(theta)}; trace factor {report.trace_factor:.6g}")
    return EXIT_OK


# ---------------------------------------------------------------- error-curve


def _trials_arg(text):
    return math.inf if str(text).lower() in ("inf", "infinity") else int(text)


def error_curve(n, theta, phases, tau, lam=0.0, guard=1e-6, truth=None, density=None):
    report = error_report(AngularMomentumGeometry(n), theta, phases, tau, lam, guard)
    columns = {"r": report.column("r"), "bound_per_element": report.column("bound_per_element")}
    if truth is not None and density is not None:
        columns["measured_per_element"] = np.array(
            [per_diagonal_distance(density, truth, r, per_element=True) for r in range(n + 1)]
        )
    return report, columns


def cmd_error_curve(args) -> int:
    manifest = _manifest(args)
    n = _pick(args.n, manifest.n if manifest else None)
    if n is None:
        raise ValidationFailed("error-curve needs --n (or a manifest)")
    theta = _pick(args.theta, manifest.theta if manifest else DEFAULT_THETA)
    phases = _pick(args.phases, manifest.phases if manifest else 180)
    if manifest and manifest.noise.get("model") == "exact":
        mtau = math.inf
    else:
        mtau = manifest.noise.get("tau", 2000) if manifest else 2000
    tau = _pick(args.trials, mtau)
    truth = density = None
    if args.truth or args.density:
        if not (args.truth and args.density):
            raise ValidationFailed("--truth and --density must be given together")
        truth = io.read_state(args.truth).to_density()
        density = io.read_state(args.density).to_density()
    report, columns = error_curve(n, theta, phases, tau, 0.0, args.guard, truth, density)
    meta = {
        "n": n, "k": phases, "tau": tau, "theta": float(theta),
        "transmission": math.cos(theta) ** 2, "noise_norm": report.noise_norm,
        "digest": io.digest({"step": "error-curve", "n": n, "theta": theta, "k": phases, "tau": str(tau)}),
    }
    io.write_curve(args.out, columns, meta)
    print(f"wrote {n + 1}-row error curve to {args.out}; {_theta_line(theta)}")
    return EXIT_OK


# ---------------------------------------------------------------- validate


def validate_file(path) -> list[str]:
    """Run the invariant checks that apply to ``path``; return the problems found."""
    tag = io.sniff_format(path)
    if tag == io.STATE_FORMAT:
        header, data = io.read_delimited(path, io.STATE_FORMAT)
        dim = int(header["n"]) + 1
        if header.get("kind") == "pure":
            norm = float(np.sum(data ** 2))
            return [] if abs(norm - 1) <= 1e-12 else [f"amplitude norm {norm!r} != 1"]
        rho = data[:, 0::2] + 1j * data[:, 1::2]
        if rho.shape != (dim, dim):
            return [f"matrix shape {rho.shape}, expected {(dim, dim)}"]
        return TwoModeDensityMatrix.invariant_violations(rho, 1e-12, physical=header.get("kind") == "mixed")
    if tag == io.SURFACE_FORMAT:
        header, data = io.read_delimited(path, io.SURFACE_FORMAT)
        shape = (int(header["n"]) + 1, int(header["k"]))
        if data.shape != shape:
            return [f"surface shape {data.shape}, expected {shape}"]
        return ProbabilitySurface.invariant_violations(data, int(header["tau"]))
    if tag == io.REPORT_FORMAT:
        report, _ = io.read_report(path)
        problems = []
        for d in report.diagonals:
            if d.bound < 0 or d.bound_per_element < 0:
                problems.append(f"r={d.r}: negative bound")
            if d.min_sigma > d.max_sigma:
                problems.append(f"r={d.r}: min sigma > max sigma")
        return problems
    if tag == io.CURVE_FORMAT:
        _, cols = io.read_curve(path)
        bad = [n for n, c in cols.items() if (c < 0).any()]
        return [f"negative values in column {n}" for n in bad]
    if tag == io.MANIFEST_FORMAT:
        m = io.ExperimentManifest.load(path)
        NoiseSpec(m.noise.get("model", "gaussian"), int(m.noise.get("tau", 2000)), int(m.noise.get("seed", 0)))
        return []
    raise FormatError(f"{path}: unknown format {tag!r}")


def cmd_validate(args) -> int:
    failed = False
    for path in args.files:
        try:
            problems = validate_file(path)
        except (TomographyError, ValueError, KeyError) as exc:
            problems = [str(exc)]
        status = "ok" if not problems else "FAIL"
        print(f"{status} {path}")
        for p in problems:
            print(f"  - {p}")
        failed |= bool(problems)
    return EXIT_VALIDATION if failed else EXIT_OK


# ---------------------------------------------------------------- run


def cmd_run(args) -> int:
    manifest = io.ExperimentManifest.load(args.manifest)
    out = Path(args.out_dir) if args.out_dir else Path(args.manifest).parent
    paths = {
        name: out / manifest.outputs.get(name, default)
        for name, default in (
            ("state", "state.txt"), ("surface", "surface.txt"), ("density", "density.txt"),
            ("report", "report.json"), ("curve", "curve.txt"),
        )
    }
    common = {"manifest": args.manifest}
    steps = [
        (cmd_make_state, dict(kind=None, n=None, theta_state=None, phi_state=None, n1=None,
                              spec=None, relative_phase=False, out=paths["state"])),
        (cmd_simulate, dict(state=paths["state"], theta=None, phases=None, noise=None,
                            trials=None, seed=None, out=paths["surface"])),
        (cmd_reconstruct, dict(surface=paths["surface"], theta=None, lam=None, max_diagonal=None,
                               guard=None, truth=paths["state"], clip_psd=False, workers=1,
                               out=paths["density"], report=paths["report"])),
        (cmd_error_curve, dict(n=None, theta=None, phases=None, trials=None, guard=1e-6,
                               truth=paths["state"], density=paths["density"], out=paths["curve"])),
    ]
    base = Path(args.manifest).parent
    for func, ns in steps:
        if func is cmd_make_state and manifest.state.get("kind") == "mixed":
            spec = Path(manifest.state["spec"])
            ns["spec"] = str(spec if spec.is_absolute() else base / spec)
        code = func(argparse.Namespace(**common, **ns))
        if code:
            return code
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bectomo", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("make-state", help="write a state file")
    s.add_argument("--kind", choices=("coherent", "fock", "mixed"))
    s.add_argument("--n", type=int)
    s.add_argument("--theta-state", type=float, help="polar angle of the projected coherent state")
    s.add_argument("--phi-state", type=float, help="phase of the projected coherent state")
    s.add_argument("--relative-phase", action="store_true", help="use e^{i n phi} instead of a global phase")
    s.add_argument("--n1", type=int, help="mode-1 count of a Fock product state")
    s.add_argument("--spec", help="mixture specification file")
    s.add_argument("--manifest")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_make_state)

    s = sub.add_parser("simulate", help="compute an exact or noisy probability surface")
    s.add_argument("--state", required=True)
    s.add_argument("--theta", type=float, help="beamsplitter angle in radians")
    s.add_argument("--phases", type=int, help="number K of equally spaced phase shifts")
    s.add_argument("--noise", choices=NOISE_MODELS)
    s.add_argument("--trials", type=int, help="trials tau per phase")
    s.add_argument("--seed", type=int)
    s.add_argument("--manifest")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("reconstruct", help="reconstruct the density matrix from a surface")
    s.add_argument("--surface", required=True)
    s.add_argument("--theta", type=float)
    s.add_argument("--lambda", dest="lam", help="Tikhonov parameter (number or 'auto')")
    s.add_argument("--max-diagonal", type=int)
    s.add_argument("--guard", type=float, help="refuse |theta - pi/4| below this")
    s.add_argument("--truth", help="state file of the true state, for error norms")
    s.add_argument("--clip-psd", action="store_true", help="clip negative eigenvalues of the estimate")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--manifest")
    s.add_argument("--out", required=True, help="density-matrix output file")
    s.add_argument("--report", required=True, help="JSON report output file")
    s.set_defaults(func=cmd_reconstruct)

    s = sub.add_parser("error-curve", help="per-element a-priori error bound versus r")
    s.add_argument("--n", type=int)
    s.add_argument("--theta", type=float)
    s.add_argument("--phases", type=int)
    s.add_argument("--trials", type=_trials_arg, help="trials per phase, or 'inf'")
    s.add_argument("--guard", type=float, default=1e-6)
    s.add_argument("--truth")
    s.add_argument("--density", help="reconstructed density file (with --truth)")
    s.add_argument("--manifest")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_error_curve)

    s = sub.add_parser("validate", help="check the invariants of data files")
    s.add_argument("files", nargs="+")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("run", help="make-state -> simulate -> reconstruct -> error-curve from a manifest")
    s.add_argument("--manifest", required=True)
    s.add_argument("--out-dir")
    s.set_defaults(func=cmd_run)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except BalancedBeamsplitter as exc:
        print(f"error: balanced beamsplitter: {exc}", file=sys.stderr)
        return EXIT_BALANCED
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValidationFailed, TomographyError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
