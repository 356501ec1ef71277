import logging
import traceback

import numpy as np
import pytest

from sdlab.error.handling import ErrorManager
from sdlab.item import CheckItem
from sdlab.pipeline import CheckPipeline
from tests.utils import (
    CriticalIOErrorStage,
    ErrorStage,
    ExceptionStage,
    FixedResidual,
    ListSource,
    ScaledResidual,
    check_items,
)

logger = logging.getLogger(__name__)


def _pipeline(*args, **kwargs):
    return CheckPipeline(*args, **kwargs).set_error_manager(ErrorManager().raise_on_critical_error())


def test_run():
    pipeline = (
        _pipeline()
        .set_source(ListSource(check_items(10)))
        .append_stage("residual", ScaledResidual())
        .append_stage("fixed", FixedResidual(1e-14))
        .build()
    )
    for item in pipeline.run():
        assert item.residual == 1e-14
        assert item.passed
        assert item.get_timing("residual") is not None
        assert item.get_timing("fixed") is not None
        assert set(item.timed_stages) == {"residual", "fixed"}
    assert pipeline.count == 10
    assert pipeline.get_stage("fixed").name == "fixed"
    assert str(pipeline.get_stage("fixed")) == "Stage fixed"


def test_build_errors():
    with pytest.raises(ValueError, match="at least a stage"):
        _pipeline().set_source(ListSource([])).build()
    with pytest.raises(ValueError, match="already used"):
        _pipeline().append_stage("fixed", FixedResidual()).append_stage("fixed", FixedResidual())
    with pytest.raises(ValueError, match="Set the source"):
        list(_pipeline().append_stage("fixed", FixedResidual()).build().run())
    with pytest.raises(ValueError, match="Build the pipeline"):
        list(_pipeline().set_source(ListSource([])).append_stage("fixed", FixedResidual()).run())
    with pytest.raises(ValueError):
        CheckPipeline(max_workers=0)


def test_errors(caplog):
    pipeline = (
        _pipeline()
        .set_error_manager(ErrorManager())
        .set_source(ListSource(check_items(10)))
        .append_stage("residual", ScaledResidual())
        .append_stage("error", ErrorStage())
        .build()
    )
    for item in pipeline.run():
        assert item.has_errors()
        assert not item.passed
        assert item.get_timing("residual") is not None
        assert item.get_timing("error") is not None
        error = next(item.soft_errors())
        assert error.get_exception() is None
        assert error.get_stage() == "error"
        assert str(error) == "test check error"
        assert item.describe() == "error: test check error"
    assert all(
        "stage error has generated an error" in record.msg.lower()
        for record in caplog.records
        if record.levelno == logging.WARNING
    )
    assert pipeline.count == 10
    pipeline = (
        _pipeline()
        .set_error_manager(ErrorManager())
        .set_source(ListSource(check_items(10)))
        .append_stage("error", ErrorStage())
        .append_stage("residual", ScaledResidual())
        .build()
    )
    caplog.clear()
    for item in pipeline.run():
        # soft errors do not stop the following stages
        assert item.has_errors()
        assert item.residual is not None
        assert item.get_timing("residual") is not None
    assert pipeline.count == 10
    pipeline = (
        _pipeline()
        .set_error_manager(ErrorManager())
        .set_source(ListSource(check_items(10)))
        .append_stage("residual", ScaledResidual())
        .append_stage("error1", CriticalIOErrorStage())
        .build()
    )
    for item in pipeline.run():
        assert item.has_critical_errors()
        assert item.get_timing("error1") is not None
        for error in item.critical_errors():
            assert isinstance(error.get_exception(), IOError)
            assert str(error) == "test check critical IO error"
    pipeline = (
        _pipeline()
        .set_error_manager(ErrorManager())
        .set_source(ListSource(check_items(10)))
        .append_stage("error1", ExceptionStage())
        .append_stage("error2", ErrorStage())
        .build()
    )
    caplog.clear()
    for item in pipeline.run():
        assert item.has_critical_errors()
        assert item.residual is None
        assert item.get_timing("error1") is not None
        assert item.get_timing("error2") is None
        for error in item.critical_errors():
            assert isinstance(error.get_exception(), np.linalg.LinAlgError)
            assert str(error) == "test singular matrix"
    assert all(
        "stage error1 has generated an error" in record.msg.lower()
        for record in caplog.records
        if record.levelno == logging.ERROR
    )
    assert pipeline.count == 10
    with pytest.raises(np.linalg.LinAlgError):
        pipeline = (
            _pipeline()
            .set_source(ListSource(check_items(10)))
            .append_stage("error", ExceptionStage())
            .build()
        )
        try:
            for _ in pipeline.run():
                pass
        except Exception:
            assert "test singular matrix" in traceback.format_exc()
            raise
    pipeline = (
        _pipeline()
        .set_error_manager(ErrorManager().no_skip_on_critical_error())
        .set_source(ListSource(check_items(10)))
        .append_stage("error", ExceptionStage())
        .append_stage("residual", ScaledResidual())
        .build()
    )
    for item in pipeline.run():
        assert item.get_timing("error") is not None
        assert item.get_timing("residual") is not None
    assert pipeline.count == 10


def test_concurrent_run():
    items = check_items(50)
    for jobs in (1, 2, 4):
        pipeline = (
            _pipeline(max_workers=jobs)
            .set_source(ListSource(items))
            .append_stage("residual", ScaledResidual())
            .build()
        )
        processed = list(pipeline.run())
        assert [item.name for item in processed] == [f"property_{i}" for i in range(50)]
        assert [item.residual for item in processed] == pytest.approx([i * 1e-3 for i in range(50)])
        assert pipeline.count == 50


def test_concurrency_errors():
    pipeline = (
        _pipeline(max_workers=3)
        .set_error_manager(ErrorManager())
        .set_source(ListSource(check_items(10)))
        .append_stage("residual", ScaledResidual())
        .append_stage("error1", ErrorStage())
        .append_stage("error2", ErrorStage())
        .build()
    )
    for item in pipeline.run():
        assert len(list(item.soft_errors())) == 2
        assert item.get_timing("error2") is not None
    assert pipeline.count == 10
    with pytest.raises(np.linalg.LinAlgError):
        pipeline = (
            _pipeline(max_workers=2)
            .set_source(ListSource(check_items(10)))
            .append_stage("error", ExceptionStage())
            .build()
        )
        list(pipeline.run())


def test_single_items():
    pipeline = _pipeline().append_stage("residual", ScaledResidual()).append_stage("fixed", FixedResidual(0.5)).build()
    item = CheckItem("dirac", "property_3", 1.0)
    result = pipeline.process(item)
    assert result is item
    assert result.residual == 0.5
    assert result.passed
    assert pipeline.count == 1
