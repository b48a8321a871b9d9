import argparse
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

Handler = Callable[[argparse.Namespace], int]
Argument = Tuple[Tuple[str, ...], Dict[str, Any]]


def arg(*flags: str, **kwargs: Any) -> Argument:
    return flags, kwargs


@dataclass
class Command:
    name: str
    help: str
    handler: Handler
    arguments: List[Argument] = field(default_factory=list)


class CommandRouter:
    """Collects sub-commands so modules can register them independently."""

    def __init__(self) -> None:
        self.commands: Dict[str, Command] = {}

    def command(self, name: str, *, help: str, arguments: Sequence[Argument] = ()) -> Callable[[Handler], Handler]:
        def decorator(fn: Handler) -> Handler:
            if name in self.commands:
                raise ValueError(f"command {name!r} registered twice")
            self.commands[name] = Command(name=name, help=help, handler=fn, arguments=list(arguments))
            return fn

        return decorator

    def include_router(self, router: "CommandRouter", common: Sequence[Argument] = ()) -> None:
        for name, cmd in router.commands.items():
            if name in self.commands:
                raise ValueError(f"command {name!r} registered twice")
            self.commands[name] = Command(cmd.name, cmd.help, cmd.handler, list(common) + cmd.arguments)

    def build_parser(self, prog: str, description: Optional[str] = None) -> argparse.ArgumentParser:
        parser = argparse.ArgumentParser(prog=prog, description=description)
        parser.add_argument("--log-level", default=None, help="override GHYENA_LOG_LEVEL")
        sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
        for cmd in self.commands.values():
            p = sub.add_parser(cmd.name, help=cmd.help, description=cmd.help)
            for flags, kwargs in cmd.arguments:
                p.add_argument(*flags, **kwargs)
            p.set_defaults(handler=cmd.handler)
        return parser
