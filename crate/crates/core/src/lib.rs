pub mod audit;
pub mod bench;
pub mod b64;
pub mod crypto;
pub mod directory;
pub mod encoding;
pub mod epoch;
pub mod export;
pub mod model;
pub mod ordering;
pub mod protocol;
pub mod sim;

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/proofs.md")]
    struct Proofs;
    #[doc = include_str!("../../../book/src/hashchain.md")]
    struct HashChain;
    #[doc = include_str!("../../../book/src/bloom.md")]
    struct Bloom;
    #[doc = include_str!("../../../book/src/privacy.md")]
    struct Privacy;
    #[doc = include_str!("../../../book/src/epochs.md")]
    struct Epochs;
    #[doc = include_str!("../../../book/src/protocol.md")]
    struct Protocol;
    #[doc = include_str!("../../../book/src/audit.md")]
    struct Audit;
    #[doc = include_str!("../../../book/src/scenarios.md")]
    struct Scenarios;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
