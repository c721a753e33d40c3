import logging

from app.commands.common import add_taxonomy_args, load_trie


logger = logging.getLogger(__name__)

LEVEL_LABELS = {
    "chapter": "chapters",
    "heading": "headings",
    "sub_heading": "sub_headings",
    "product_tariff": "product_tariffs",
}


def add_parser(subparsers) -> None:
    parser = subparsers.add_parser("validate-taxonomy", help="load a taxonomy CSV and summarize it")
    add_taxonomy_args(parser)
    parser.set_defaults(handler=run)


def run(args) -> int:
    trie = load_trie(args.taxonomy, args.kind)
    counts = trie.level_counts()
    depth_ok = trie.depth_ok()

    parts = [f"leaves: {trie.leaf_count}"]
    parts.extend(f"{LEVEL_LABELS[level.value]}: {count}" for level, count in counts.items())
    parts.append(f"depth: {'ok' if depth_ok else 'inconsistent'}")
    print(", ".join(parts))

    if not depth_ok:
        logger.error(f"{args.taxonomy}: leaves found above depth {trie.depth}")
        return 1
    return 0
