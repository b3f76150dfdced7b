"""End-to-end retrieval simulation with bit-exact wire formats.

Wire layout (all integers little-endian):

query
    ``[u8 version=1][u32 scheme_id][u8 has_K][u8 K if has_K][u16 N]
    [N x u16 indices]`` with 1-based, strictly increasing file indices.
    ``K`` is the public time-sharing coin, present only for composed
    schemes.
answer
    ``[u8 version=1][u32 scheme_id][u16 bit_len][ceil(bit_len/8) bytes]``;
    the codeword index occupies exactly ``bit_len`` bits, written MSB-first
    and zero-padded to the byte boundary.

Both codecs are canonical: ``encode(decode(b)) == b`` for every accepted
byte string, and every other byte string raises :class:`ProtocolError`.
The server's answer is a pure function of the query bytes and the stored
files; the requested index never reaches it.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .core import LeakageKind, SchemePoint, per_symbol_distortion
from .errors import ProtocolError
from .leakage import QuerySampleSet
from .quantizer import nearest
from .schemes import CompressionScheme, TimeSharedScheme
from .validation import check_positive_int

WIRE_VERSION = 1


@dataclass(frozen=True)
class QueryMessage:
    """A request for the sorted ``subset`` of 1-based file indices.

    ``coin`` is the time-sharing prefix (None when the scheme is not
    composed); the randomness behind the dummy indices stays on the user
    side and never appears on the wire.
    """

    scheme_id: int
    subset: tuple
    coin: int | None = None
    version: int = WIRE_VERSION

    def __post_init__(self):
        subset = tuple(int(i) for i in self.subset)
        if len(subset) < 1:
            raise ProtocolError("query subset is empty")
        if any(not 1 <= i <= 0xFFFF for i in subset):
            raise ProtocolError(f"indices out of range in {subset}")
        if any(a >= b for a, b in zip(subset, subset[1:])):
            raise ProtocolError(f"subset {subset} is not strictly increasing")
        if self.coin is not None and not 0 <= self.coin <= 0xFF:
            raise ProtocolError(f"coin {self.coin} out of range")
        if not 0 <= self.scheme_id <= 0xFFFFFFFF:
            raise ProtocolError(f"scheme_id {self.scheme_id} out of range")
        object.__setattr__(self, "subset", subset)


@dataclass(frozen=True)
class AnswerMessage:
    """A codeword index packed into exactly ``bit_len`` bits."""

    scheme_id: int
    bit_len: int
    codeword_index: int
    version: int = WIRE_VERSION

    def __post_init__(self):
        if not 0 <= self.bit_len <= 0xFFFF:
            raise ProtocolError(f"bit length {self.bit_len} out of range")
        if not 0 <= self.codeword_index < (1 << self.bit_len):
            raise ProtocolError(
                f"index {self.codeword_index} does not fit {self.bit_len} bits"
            )
        if not 0 <= self.scheme_id <= 0xFFFFFFFF:
            raise ProtocolError(f"scheme_id {self.scheme_id} out of range")


@dataclass(frozen=True)
class TranscriptRecord:
    trial: int
    requested: int
    query_bytes: bytes
    answer_bytes: bytes
    answer_bits: int
    distortion: float

    def csv_row(self):
        return (f"{self.trial},{self.requested},{self.query_bytes.hex()},"
                f"{self.answer_bits},{self.distortion:.9g}")


TRANSCRIPT_HEADER = "trial,m,query_hex,answer_bits,distortion"


def encode_query(msg):
    parts = [struct.pack("<BI", msg.version, msg.scheme_id)]
    if msg.coin is None:
        parts.append(b"\x00")
    else:
        parts.append(struct.pack("<BB", 1, msg.coin))
    parts.append(struct.pack("<H", len(msg.subset)))
    parts.append(struct.pack(f"<{len(msg.subset)}H", *msg.subset))
    return b"".join(parts)


def decode_query(data):
    if len(data) < 6:
        raise ProtocolError(f"query too short: {len(data)} bytes")
    version, scheme_id, has_coin = struct.unpack_from("<BIB", data, 0)
    if version != WIRE_VERSION:
        raise ProtocolError(f"unsupported query version {version}")
    pos = 6
    coin = None
    if has_coin == 1:
        if len(data) < pos + 1:
            raise ProtocolError("query truncated before coin byte")
        coin = data[pos]
        pos += 1
    elif has_coin != 0:
        raise ProtocolError(f"has_K byte must be 0 or 1, got {has_coin}")
    if len(data) < pos + 2:
        raise ProtocolError("query truncated before subset length")
    (n,) = struct.unpack_from("<H", data, pos)
    pos += 2
    if n < 1:
        raise ProtocolError("query subset is empty")
    end = pos + 2 * n
    if len(data) != end:
        raise ProtocolError(
            f"query length {len(data)} != expected {end} for N={n}"
        )
    subset = struct.unpack_from(f"<{n}H", data, pos)
    return QueryMessage(scheme_id=scheme_id, subset=subset, coin=coin,
                        version=version)


def encode_answer(msg):
    head = struct.pack("<BIH", msg.version, msg.scheme_id, msg.bit_len)
    nbytes = (msg.bit_len + 7) // 8
    if nbytes == 0:
        return head
    shift = (8 - msg.bit_len % 8) % 8
    payload = (msg.codeword_index << shift).to_bytes(nbytes, "big")
    return head + payload


def decode_answer(data):
    if len(data) < 7:
        raise ProtocolError(f"answer too short: {len(data)} bytes")
    version, scheme_id, bit_len = struct.unpack_from("<BIH", data, 0)
    if version != WIRE_VERSION:
        raise ProtocolError(f"unsupported answer version {version}")
    nbytes = (bit_len + 7) // 8
    if len(data) != 7 + nbytes:
        raise ProtocolError(
            f"answer length {len(data)} != expected {7 + nbytes} "
            f"for bit_len={bit_len}"
        )
    if nbytes == 0:
        index = 0
    else:
        raw = int.from_bytes(data[7:], "big")
        shift = (8 - bit_len % 8) % 8
        if raw & ((1 << shift) - 1):
            raise ProtocolError("nonzero padding bits in answer")
        index = raw >> shift
    return AnswerMessage(scheme_id=scheme_id, bit_len=bit_len,
                         codeword_index=index, version=version)


def user_make_query(m, scheme, rng):
    """Build the query for requested 1-based index ``m``.

    The ``subset_size - 1`` dummy indices are drawn uniformly without
    replacement from the other files, so the transmitted sorted subset is
    uniform over all subsets containing ``m``.  Composed schemes first flip
    the public coin and prefix it to the component query.
    """
    if not 1 <= m <= scheme.num_files:
        raise ValueError(f"m={m} outside [1, {scheme.num_files}]")
    if isinstance(scheme, TimeSharedScheme):
        coin = int(rng.random() < scheme.lam)
        inner = user_make_query(m, scheme.component(coin), rng)
        return QueryMessage(scheme_id=scheme.scheme_id, subset=inner.subset,
                            coin=coin)
    n_sub = scheme.subset_size
    others = [i for i in range(1, scheme.num_files + 1) if i != m]
    dummies = rng.choice(len(others), size=n_sub - 1, replace=False) \
        if n_sub > 1 else []
    subset = tuple(sorted([m] + [others[i] for i in dummies]))
    return QueryMessage(scheme_id=scheme.scheme_id, subset=subset)


def server_answer(query, files, scheme):
    """Compress the queried subset of one sample's files.

    ``files`` is the (num_files, beta) array of one stored sample.  The
    server works from the query alone; it never sees the requested index.
    """
    files = np.asarray(files, dtype=np.float64)
    comp, expected_sub = _component_for(query, scheme)
    if files.shape != (comp.num_files, comp.beta):
        raise ProtocolError(
            f"stored sample has shape {files.shape}, scheme expects "
            f"({comp.num_files}, {comp.beta})"
        )
    if query.scheme_id != scheme.scheme_id:
        raise ProtocolError(
            f"query scheme_id {query.scheme_id} != {scheme.scheme_id}"
        )
    if len(query.subset) != comp.subset_size or query.subset[-1] > comp.num_files:
        raise ProtocolError(
            f"subset {query.subset} invalid for N={comp.subset_size}, "
            f"M={comp.num_files}"
        )
    idx = np.array(query.subset) - 1
    shifted = files[idx] - comp.file_means[idx]
    vector = shifted.reshape(-1)
    book = comp.codebook_for(query.subset)
    codeword, _ = nearest(book, vector)
    return AnswerMessage(scheme_id=query.scheme_id,
                         bit_len=comp.answer_bits,
                         codeword_index=codeword)


def _component_for(query, scheme):
    if isinstance(scheme, TimeSharedScheme):
        if query.coin is None or query.coin not in (0, 1):
            raise ProtocolError("composed scheme requires a 0/1 coin prefix")
        return scheme.component(query.coin), None
    if query.coin is not None:
        raise ProtocolError("unexpected coin prefix for a plain scheme")
    return scheme, None


def user_reconstruct(answer, m, query, scheme):
    """Decode the answer and keep only the requested file's estimate.

    The other reconstructed files of the subset are discarded.  Requires
    ``m`` to be in the query subset.
    """
    comp, _ = _component_for(query, scheme)
    if m not in query.subset:
        raise ValueError(f"requested index {m} not in query subset {query.subset}")
    if answer.scheme_id != query.scheme_id:
        raise ProtocolError("answer does not match the query's scheme")
    if answer.bit_len != comp.answer_bits:
        raise ProtocolError(
            f"answer bit length {answer.bit_len} != scheme's {comp.answer_bits}"
        )
    book = comp.codebook_for(query.subset)
    if answer.codeword_index >= book.k:
        raise ProtocolError(
            f"codeword index {answer.codeword_index} >= k={book.k}"
        )
    codeword = book.vectors[answer.codeword_index]
    pos = query.subset.index(m)
    slot = codeword[pos * comp.beta:(pos + 1) * comp.beta]
    return slot + comp.file_means[m - 1]


@dataclass(frozen=True)
class ExperimentResult:
    point: SchemePoint
    queries: QuerySampleSet
    transcripts: tuple

    def transcript_csv(self):
        lines = [TRANSCRIPT_HEADER]
        lines.extend(rec.csv_row() for rec in self.transcripts)
        return "\n".join(lines) + "\n"


def run_experiment(test, scheme, trials, seed, keep_transcripts=True):
    """Measure (rate, distortion, leakage) through the full wire exchange.

    Every trial draws a sample and a uniform request, encodes and decodes
    both messages through the byte codecs, and measures the reconstruction
    distortion.  The measured rate is the mean logical answer length per
    symbol, which for a fixed-length scheme equals the nominal rate
    exactly.  The exported query set feeds the leakage estimators; the
    leakage slot of the returned point is the scheme's analytic value.
    """
    check_positive_int(trials, "trials")
    rng = np.random.default_rng(seed)
    m_files = scheme.num_files
    beta = scheme.beta
    if test.num_files != m_files or test.dim != beta:
        raise ProtocolError(
            f"dataset shape ({test.num_files} x {test.dim}) does not match "
            f"scheme ({m_files} x {beta})"
        )
    composed = isinstance(scheme, TimeSharedScheme)
    if composed:
        arity = 1 + max(scheme.scheme0.subset_size, scheme.scheme1.subset_size)
    else:
        arity = scheme.subset_size
    queries = np.zeros((trials, arity))
    labels = np.empty(trials, dtype=np.int64)
    transcripts = []
    total_distortion = 0.0
    total_bits = 0
    for t in range(trials):
        m = int(rng.integers(1, m_files + 1))
        sample = test.values[int(rng.integers(0, test.num_samples))]
        qmsg = user_make_query(m, scheme, rng)
        qbytes = encode_query(qmsg)
        server_view = decode_query(qbytes)
        amsg = server_answer(server_view, sample, scheme)
        abytes = encode_answer(amsg)
        user_view = decode_answer(abytes)
        estimate = user_reconstruct(user_view, m, qmsg, scheme)
        d = per_symbol_distortion(sample[m - 1], estimate)
        labels[t] = m
        if composed:
            queries[t, 0] = qmsg.coin
            queries[t, 1:1 + len(qmsg.subset)] = qmsg.subset
        else:
            queries[t, :] = qmsg.subset
        total_distortion += d
        total_bits += amsg.bit_len
        if keep_transcripts:
            transcripts.append(TranscriptRecord(
                trial=t, requested=m, query_bytes=qbytes,
                answer_bytes=abytes, answer_bits=amsg.bit_len, distortion=d,
            ))
    point = SchemePoint(
        rate=total_bits / (trials * beta),
        distortion=total_distortion / trials,
        leakage=scheme.leakage,
        leakage_kind=LeakageKind.MAP_ACCURACY,
        label="measured over wire; leakage slot is the analytic value",
        scheme="time-share" if composed else "compression",
    )
    sample_set = QuerySampleSet(
        num_files=m_files, labels=labels, queries=queries,
        source=f"run_experiment(seed={seed}, trials={trials})",
    )
    return ExperimentResult(point=point, queries=sample_set,
                            transcripts=tuple(transcripts))
