"""Ray and intersection-test accounting."""

from __future__ import annotations

from dataclasses import dataclass

RAY_KINDS = ("primary", "shadow", "specular", "ambient")


@dataclass
class TraceCounters:
    primary: int = 0
    shadow: int = 0
    specular: int = 0
    ambient: int = 0
    intersection_tests: int = 0

    def count_ray(self, kind: str) -> None:
        setattr(self, kind, getattr(self, kind) + 1)

    def rays_total(self) -> int:
        return self.primary + self.shadow + self.specular + self.ambient

    def merge(self, other: "TraceCounters") -> None:
        self.primary += other.primary
        self.shadow += other.shadow
        self.specular += other.specular
        self.ambient += other.ambient
        self.intersection_tests += other.intersection_tests

    def copy(self) -> "TraceCounters":
        return TraceCounters(self.primary, self.shadow, self.specular,
                             self.ambient, self.intersection_tests)

    def delta_since(self, snap: "TraceCounters") -> "TraceCounters":
        return TraceCounters(
            self.primary - snap.primary,
            self.shadow - snap.shadow,
            self.specular - snap.specular,
            self.ambient - snap.ambient,
            self.intersection_tests - snap.intersection_tests,
        )

    def as_dict(self) -> dict:
        return {
            "primary": self.primary,
            "shadow": self.shadow,
            "specular": self.specular,
            "ambient": self.ambient,
            "intersection_tests": self.intersection_tests,
            "rays_total": self.rays_total(),
        }
