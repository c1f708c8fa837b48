from twinbridge.service.gateway import create_app, run_gateway

__all__ = ["create_app", "run_gateway"]
