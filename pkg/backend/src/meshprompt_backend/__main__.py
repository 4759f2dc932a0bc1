"""Run the backend server: ``python -m meshprompt_backend [--port N] ...``"""

import argparse

import uvicorn

from .config import ServerConfig
from .server import create_app


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="meshprompt-backend")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=None)
    parser.add_argument("--diffusion-model", default=None)
    parser.add_argument("--controlnet-model", default=None)
    parser.add_argument("--llm-model", default=None)
    parser.add_argument("--device", default=None)
    parser.add_argument("--max-concurrency", type=int, default=None)
    args = parser.parse_args(argv)

    overrides = {
        key: value
        for key, value in [
            ("port", args.port),
            ("diffusion_model", args.diffusion_model),
            ("controlnet_model", args.controlnet_model),
            ("llm_model", args.llm_model),
            ("device", args.device),
            ("max_concurrency", args.max_concurrency),
        ]
        if value is not None
    }
    config = ServerConfig.from_env(**overrides)
    uvicorn.run(create_app(config), host=args.host, port=config.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
