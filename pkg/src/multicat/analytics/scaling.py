from typing import List, Sequence

from pydantic import BaseModel, Field, model_validator

from multicat.analytics.confusion import AnalyticsError


class ScalingCurve(BaseModel):
    """Error against class count, both also relative to the smallest dataset."""

    sizes: List[int] = Field(description="Class counts.")
    errors: List[float] = Field(description="Average error per class count.")
    relative_sizes: List[float] = Field(description="sizes divided by the first size.")
    relative_errors: List[float] = Field(description="errors divided by the first error.")
    growth_ratios: List[float] = Field(description="relative_errors divided by relative_sizes.")

    @model_validator(mode="after")
    def check_lengths(self) -> "ScalingCurve":
        lengths = {
            len(values)
            for values in (self.sizes, self.errors, self.relative_sizes, self.relative_errors, self.growth_ratios)
        }
        if len(lengths) != 1:
            raise ValueError("All curve lists must have equal length")
        return self


def relative_increase_curve(sizes: Sequence[int], errors: Sequence[float]) -> ScalingCurve:
    if len(sizes) != len(errors) or not sizes:
        raise AnalyticsError("Sizes and errors must be non-empty lists of equal length")
    if sizes[0] == 0 or errors[0] == 0:
        raise AnalyticsError("The first size and the first error must not be zero")
    relative_sizes = [size / sizes[0] for size in sizes]
    relative_errors = [error / errors[0] for error in errors]
    return ScalingCurve(
        sizes=list(sizes),
        errors=list(errors),
        relative_sizes=relative_sizes,
        relative_errors=relative_errors,
        growth_ratios=[error / size for error, size in zip(relative_errors, relative_sizes)],
    )
