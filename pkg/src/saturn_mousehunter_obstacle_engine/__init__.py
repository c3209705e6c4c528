"""Saturn MouseHunter Obstacle Engine"""

__version__ = "0.1.0"


def main() -> None:
    from saturn_mousehunter_obstacle_engine.api.cli import main as cli_main

    raise SystemExit(cli_main())
