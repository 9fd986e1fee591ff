"""raybar: distributed ray tracer with adaptive quincunx sampling.

Rendering is split into scanbars or windows distributed to workers over a
message protocol; indirect illumination is cached in a shared, broadcast
ambient octree.  A deterministic simulated transport makes distributed runs
replayable tick for tick.
"""

__version__ = "0.1.0"
