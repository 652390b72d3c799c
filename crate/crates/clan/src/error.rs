use thiserror::Error;

/// Errors from the evolutionary core.
#[derive(Debug, Error)]
pub enum NeatError {
    #[error("input arity mismatch: genome expects {expected} inputs, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("malformed genome {genome_id}: {reason}")]
    MalformedGenome { genome_id: u64, reason: String },
    #[error("genome {0} has no fitness assigned")]
    UnevaluatedGenome(u64),
    #[error("invalid action for environment: {0}")]
    InvalidAction(String),
    #[error("total extinction: every species is stagnant")]
    TotalExtinction,
}

/// Errors from the wire codec.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum WireError {
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported protocol version {0}")]
    BadVersion(u8),
    #[error("CRC mismatch")]
    BadCrc,
    #[error("truncated frame: needed {needed} bytes, had {had}")]
    Truncated { needed: usize, had: usize },
    #[error("unknown message type {0}")]
    UnknownMsgType(u8),
    #[error("unknown enum tag {tag} for {what}")]
    BadTag { what: &'static str, tag: u8 },
    #[error("payload length mismatch")]
    LengthMismatch,
}

/// Errors from transports (simulated or socket).
#[derive(Debug, Error)]
pub enum TransportError {
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("connection closed by peer")]
    ConnectionClosed,
    #[error("handshake rejected: {0}")]
    HandshakeRejected(String),
    #[error("duplicate agent id {0}")]
    DuplicateAgent(u16),
    #[error("timed out waiting for {0}")]
    Timeout(String),
}

/// Errors from the metrics subsystem.
#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("negative charge amount for {0}")]
    NegativeCharge(String),
    #[error("generation {0} has no ledger rows")]
    IncompleteGeneration(u32),
    #[error("degenerate scaling fit: {0}")]
    DegenerateFit(String),
    #[error("scaling fit needs at least 3 scales, got {0}")]
    TooFewScales(usize),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Top-level run error.
#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Neat(#[from] NeatError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("acceptance check failed:\n{0}")]
    Acceptance(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
