from chronorec.embeddings.table import (
    EmbeddingTable,
    MaxAbsScaler,
    cosine_similarity,
    fit_max_abs_scaler,
)
from chronorec.embeddings.docvec import (
    DocVectorModel,
    infer_content_embedding,
    train_content_embeddings,
)
from chronorec.embeddings.nodevec import train_node_embeddings

__all__ = [
    "EmbeddingTable",
    "MaxAbsScaler",
    "cosine_similarity",
    "fit_max_abs_scaler",
    "DocVectorModel",
    "train_content_embeddings",
    "infer_content_embedding",
    "train_node_embeddings",
]
