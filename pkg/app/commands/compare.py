from pathlib import Path

from app.commands.common import kind_arg
from app.commands.evaluate import load_pairs
from app.models import CodeKind
from app.services.metrics_engine import MetricsEngine


def add_parser(subparsers) -> None:
    parser = subparsers.add_parser("compare", help="compare several prediction runs on one gold set")
    parser.add_argument("--gold", required=True, help="gold dataset JSONL with codes")
    parser.add_argument("--predictions", required=True, nargs="+", help="one predictions JSONL per run")
    parser.add_argument("--kind", type=kind_arg, default=CodeKind.HSN, help="hsn or sac (default hsn)")
    parser.set_defaults(handler=run)


def run(args) -> int:
    reports = []
    for path in args.predictions:
        pairs, skipped = load_pairs(path, args.gold, args.kind)
        reports.append((Path(path).stem, MetricsEngine.evaluate(pairs, skipped=skipped)))
    print(MetricsEngine.compare_runs(reports), end="")
    return 0
