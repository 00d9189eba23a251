"""Entry point for deployment: uvicorn main:app."""
from defectline.main import app

__all__ = ["app"]
