from app.commands.common import add_taxonomy_args, load_trie
from app.services.codec_engine import CodecEngine


def add_parser(subparsers) -> None:
    parser = subparsers.add_parser("vocab", help="print the special-token vocabulary of a taxonomy")
    add_taxonomy_args(parser)
    parser.set_defaults(handler=run)


def run(args) -> int:
    trie = load_trie(args.taxonomy, args.kind)
    for token in CodecEngine.emit_vocabulary(trie):
        print(token.text)
    return 0
