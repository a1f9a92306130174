//! File formats, ingestion, remote embeddings and parallel feature extraction
//! around [`hydra_core`].

pub use hydra_core as core;

pub mod artifacts;
pub mod config;
pub mod features;
pub mod ingest;
pub mod remote;

use hydra_core::{EmbeddingProvider, HashedEmbedder};

use config::{ConfigError, ProviderKind, Settings};
use remote::RemoteEmbedder;

/// The embedding provider selected by `settings`.
pub fn build_provider(settings: &Settings) -> Result<Box<dyn EmbeddingProvider>, ConfigError> {
    Ok(match settings.provider {
        ProviderKind::Hashed => Box::new(HashedEmbedder {
            max_tokens: settings.max_tokens,
        }),
        ProviderKind::Remote => {
            let endpoint = settings.endpoint.as_deref().ok_or(ConfigError::MissingEndpoint)?;
            Box::new(RemoteEmbedder::new(endpoint, settings.timeout(), settings.max_in_flight))
        }
    })
}
