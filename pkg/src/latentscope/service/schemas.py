"""JSON schemas for every documented API response (contract tests)."""

_MANIFEST = {
    "type": "object",
    "required": [
        "run_id",
        "dataset_name",
        "dataset_fingerprint",
        "encoder",
        "projection",
        "cluster",
        "status",
    ],
    "properties": {
        "run_id": {"type": "string"},
        "dataset_name": {"type": "string"},
        "dataset_fingerprint": {"type": "string"},
        "encoder": {"type": "object"},
        "projection": {"type": "object"},
        "cluster": {"type": "object"},
        "status": {"enum": ["pending", "complete", "failed"]},
        "created_at": {"type": "string"},
        "artifacts": {"type": "object"},
        "train_summary": {"type": "object"},
        "validation": {"type": ["object", "null"]},
        "error": {"type": ["string", "null"]},
        "failed_stage": {"type": ["string", "null"]},
    },
}

_POINT = {
    "type": "object",
    "required": ["id", "x", "y", "cluster", "labels", "duration_s", "padded_fraction"],
    "properties": {
        "id": {"type": "string"},
        "x": {"type": "number"},
        "y": {"type": "number"},
        "cluster": {"type": "integer"},
        "labels": {"type": "array", "items": {"type": "string"}},
        "duration_s": {"type": "number", "minimum": 0},
        "padded_fraction": {"type": "number", "minimum": 0, "maximum": 1},
    },
}

SCHEMAS = {
    "datasets": {
        "type": "object",
        "required": ["datasets"],
        "properties": {
            "datasets": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["name", "fingerprint"],
                    "properties": {
                        "name": {"type": "string"},
                        "fingerprint": {"type": "string"},
                        "n_segments": {"type": "integer"},
                    },
                },
            }
        },
    },
    "run_submitted": {
        "type": "object",
        "required": ["run_id", "status"],
        "properties": {
            "run_id": {"type": "string"},
            "status": {"enum": ["pending", "complete", "failed"]},
        },
    },
    "runs": {
        "type": "object",
        "required": ["runs"],
        "properties": {"runs": {"type": "array", "items": _MANIFEST}},
    },
    "run": _MANIFEST,
    "map": {
        "type": "object",
        "required": ["run_id", "points"],
        "properties": {
            "run_id": {"type": "string"},
            "dataset": {"type": "string"},
            "projection": {"type": "object"},
            "cluster_params": {"type": "object"},
            "points": {"type": "array", "items": _POINT},
        },
    },
    "latents": {
        "type": "object",
        "required": ["run_id", "ids", "latent_dim", "vectors"],
        "properties": {
            "run_id": {"type": "string"},
            "ids": {"type": "array", "items": {"type": "string"}},
            "latent_dim": {"type": "integer", "minimum": 1},
            "vectors": {
                "type": "array",
                "items": {"type": "array", "items": {"type": "number"}},
            },
        },
    },
    "metrics": {
        "type": "object",
        "required": ["run_id", "validation", "train"],
        "properties": {
            "run_id": {"type": "string"},
            "validation": {
                "type": ["object", "null"],
                "properties": {
                    "silhouette": {"type": "number", "minimum": -1, "maximum": 1},
                    "calinski_harabasz": {"type": "number", "minimum": 0},
                    "davies_bouldin": {"type": "number", "minimum": 0},
                    "n_clusters": {"type": "integer", "minimum": 0},
                    "n_noise": {"type": "integer", "minimum": 0},
                },
            },
            "train": {"type": "object"},
        },
    },
    "tree": {
        "type": "object",
        "required": ["dataset", "nodes", "codes", "cooccurrence"],
        "properties": {
            "dataset": {"type": "string"},
            "fingerprint": {"type": "string"},
            "nodes": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["code", "name"],
                    "properties": {
                        "code": {"type": "string"},
                        "name": {"type": "string"},
                        "parent_code": {"type": ["string", "null"]},
                    },
                },
            },
            "codes": {"type": "array", "items": {"type": "string"}},
            "cooccurrence": {
                "type": "array",
                "items": {"type": "array", "items": {"type": "integer", "minimum": 0}},
            },
        },
    },
    "comparison": {
        "type": "object",
        "required": ["run_a", "run_b", "k", "alignment", "agreement",
                     "correspondence", "coords_a", "coords_b"],
        "properties": {
            "run_a": {"type": "string"},
            "run_b": {"type": "string"},
            "k": {"type": "integer", "minimum": 1},
            "alignment": {"enum": ["none", "procrustes"]},
            "agreement": {
                "type": "object",
                "required": ["k", "mean_percent", "per_point_agreement"],
                "properties": {
                    "mean_percent": {"type": "number", "minimum": 0, "maximum": 100}
                },
            },
            "correspondence": {
                "type": "object",
                "required": ["segment_ids", "displacements", "summary"],
                "properties": {
                    "summary": {
                        "type": "object",
                        "required": [
                            "mean_len",
                            "median_len",
                            "p95_len",
                            "mean_direction_resultant",
                        ],
                    }
                },
            },
            "coords_a": {"type": "array"},
            "coords_b": {"type": "array"},
        },
    },
    "export_json": {
        "type": "object",
        "required": ["run_id", "ids", "latent_dim", "vectors"],
    },
    "error": {
        "type": "object",
        "required": ["detail"],
        "properties": {"detail": {"type": "string"}},
    },
}
