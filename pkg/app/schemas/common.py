"""Shared pydantic building blocks."""

from pydantic import BaseModel, Field


class ComplexValue(BaseModel):
    """A complex number as a (re, im) pair for JSON documents."""

    re: float = Field(..., description="Real part")
    im: float = Field(0.0, description="Imaginary part")

    @classmethod
    def of(cls, value: complex) -> "ComplexValue":
        value = complex(value)
        return cls(re=value.real, im=value.imag)

    @property
    def value(self) -> complex:
        return complex(self.re, self.im)
