from __future__ import annotations

import pytest

from ppflow.errors import DomainError
from ppflow.rates import RateFit, fit_loglog_rate


def test_power_law_is_recovered_exactly() -> None:
    fit = fit_loglog_rate([(eps, 3.0 * eps**0.25) for eps in (1e-1, 1e-2, 1e-3, 1e-4)])

    assert fit.slope == pytest.approx(0.25)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.reliable
    assert fit.predict(1e-5) == pytest.approx(3.0 * 1e-5**0.25)


def test_scattered_values_are_not_reliable() -> None:
    fit = fit_loglog_rate([(1e-2, 1.0), (1e-3, 5.0), (1e-4, 0.5)])
    assert not fit.reliable
    assert fit.to_dict()["reliable"] is False


def test_constant_series_has_zero_slope() -> None:
    fit = fit_loglog_rate([(1e-1, 2.0), (1e-2, 2.0), (1e-3, 2.0)])
    assert fit.slope == 0.0
    assert fit.r_squared == 1.0


@pytest.mark.parametrize(
    "pairs",
    [
        [(1e-2, 1.0), (1e-3, 2.0)],
        [(1e-2, 1.0), (1e-3, 0.0), (1e-4, 2.0)],
        [(1e-2, 1.0), (1e-2, 2.0), (1e-4, 2.0)],
        [(-1e-2, 1.0), (1e-3, 2.0), (1e-4, 2.0)],
    ],
)
def test_invalid_fits_raise(pairs) -> None:
    with pytest.raises(DomainError):
        fit_loglog_rate(pairs)


def test_rate_fit_from_dict_ignores_derived_fields() -> None:
    fit = RateFit(slope=0.5, intercept=0.1, r_squared=0.99, n_points=4)
    assert RateFit.from_dict(fit.to_dict()) == fit
