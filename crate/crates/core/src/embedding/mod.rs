//! Listing embeddings learned from session co-views with skip-gram and negative
//! sampling, plus destination embeddings and cold-start inference for listings
//! that have no interaction data.

mod destination;
mod io;
mod skipgram;
mod vocab;

pub use destination::{
    cold_start_embedding, cold_start_weights, demand_from_events, destination_embeddings, haversine_km, DemandMatrix,
    DestinationEmbeddings, GeoKernel,
};
pub use io::{read_destinations, read_embeddings, write_destinations, write_embeddings};
pub use skipgram::{
    generate_pairs, sgns_objective, sgns_step, softmax_distribution, softmax_probability, train_skipgram,
    EmbeddingTable, NegativeSampling, SkipGramConfig, SkipGramModel,
};
pub use vocab::{build_vocab, keep_probability, Vocabulary};
