use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid value: {0}")]
    Value(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("duplicate document id `{0}`")]
    DuplicateId(String),
    #[error("document `{0}` has no words")]
    EmptyDocument(String),
    #[error("answer {answer} for question {question} of `{doc_id}` is outside 1..={answers}")]
    AnswerRange {
        doc_id: String,
        question: usize,
        answer: i64,
        answers: usize,
    },
    #[error("document `{doc_id}` has {got} answers, expected {expected}")]
    Arity {
        doc_id: String,
        expected: usize,
        got: usize,
    },
    #[error("alignment failed: {0}")]
    Alignment(String),
    #[error("all components assign zero mass to the observation")]
    DegenerateEvidence,
    #[error("non-finite value in {block} at round {round}")]
    Divergence { round: usize, block: &'static str },
}

impl Error {
    pub(crate) fn dim(context: &'static str, expected: usize, got: usize) -> Self {
        Error::Dimension {
            context,
            expected,
            got,
        }
    }
}
