import logging
from typing import List, Optional

from fastapi import APIRouter, HTTPException, status
from pydantic import BaseModel

from kuranishi_atlas.atlas_file import parse_atlas
from kuranishi_atlas.config import DEFAULT_CHECKS, RunConfig
from kuranishi_atlas.demos import DEMOS, run_demo
from kuranishi_atlas.errors import DimensionError, KuranishiError
from kuranishi_atlas.pipeline import count_summary, run_checks, run_stages

router = APIRouter()


class ValidateRequest(BaseModel):
    text: str
    checks: List[str] = list(DEFAULT_CHECKS)
    level: str = "standard"
    resolution: Optional[str] = None


class DemoRequest(BaseModel):
    resolution: Optional[str] = None
    seeds: Optional[List[int]] = None


class CountRequest(BaseModel):
    text: str
    seeds: List[int] = [0]
    resolution: Optional[str] = None


@router.post("/validate", status_code=200)
def validate_atlas(validate_request: ValidateRequest):
    try:
        bundle = parse_atlas(validate_request.text)
        config = RunConfig.from_env(checks=validate_request.checks, level=validate_request.level,
                                    resolution=validate_request.resolution)
        report = run_checks(bundle.atlas, config)
        return {"success": report.passed, "atlas": bundle.atlas.name, "report": report.to_dict()}
    except ValueError as ve:
        logging.error(ve, exc_info=True)
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(ve))
    except Exception as e:
        logging.error(e, exc_info=True)
        raise HTTPException(status_code=status.HTTP_500_INTERNAL_SERVER_ERROR, detail=str(e))


@router.get("/demos", status_code=200)
def list_demos():
    return {"demos": [{"name": name, "atlas": demo.atlas, "expected": demo.expected} for name, demo in DEMOS.items()]}


@router.post("/demo/{name}", status_code=200)
def demo(name: str, demo_request: Optional[DemoRequest] = None):
    if name not in DEMOS:
        raise HTTPException(status_code=status.HTTP_404_NOT_FOUND, detail=f"Unknown demo {name}")
    demo_request = demo_request or DemoRequest()
    try:
        config = RunConfig.from_env(resolution=demo_request.resolution, seeds=demo_request.seeds)
        outcome = run_demo(name, config)
        return {"success": outcome.ok, "demo": outcome.to_dict()}
    except ValueError as ve:
        logging.error(ve, exc_info=True)
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(ve))
    except Exception as e:
        logging.error(e, exc_info=True)
        raise HTTPException(status_code=status.HTTP_500_INTERNAL_SERVER_ERROR, detail=str(e))


@router.post("/count", status_code=200)
def count(count_request: CountRequest):
    try:
        bundle = parse_atlas(count_request.text)
        if bundle.atlas.dim != 0:
            raise DimensionError(f"signed counts need virtual dimension 0, not {bundle.atlas.dim}")
        config = RunConfig.from_env(seeds=count_request.seeds, resolution=count_request.resolution, out="",
                                    independence=len(count_request.seeds) > 1)
        stages = ["count"] if bundle.nu else ["perturb", "count"]
        run = run_stages(bundle, stages, config)
        return {"success": True, "atlas": bundle.atlas.name, **count_summary(run)}
    except (ValueError, KuranishiError) as e:
        logging.error(e, exc_info=True)
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(e))
    except Exception as e:
        logging.error(e, exc_info=True)
        raise HTTPException(status_code=status.HTTP_500_INTERNAL_SERVER_ERROR, detail=str(e))
