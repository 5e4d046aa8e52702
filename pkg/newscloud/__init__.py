"""Supervised keyphrase extraction and tag clouds for broadcast news transcripts"""

from .corpus import Corpus, NewsDocument, Split, corpus_stats, load_corpus, save_corpus
from .preprocess import Token, load_resources, stem, tokenize
from .candidates import CandidatePhrase, generate_candidates
from .features import FeatureExtractor, FeatureVector, build_idf, parse_feature_set
from .ngram_lm import (
    ArpaModel,
    CompressedNGramModel,
    InterpolatedModel,
    compress,
    load_arpa,
    load_language_model,
)
from .mph import MinimalPerfectHash
from .quantize import UniformQuantizer
from .tree import Algorithm, DecisionTree, TreeParams, train_tree
from .ensemble import BaggedTreeModel, load_model, save_model, train_bagging
from .extract import evaluate, extract_top_n, rank_candidates, training_instances
from .cloud import CloudConfig, TagCloud, build_cloud, select_top_news
from .render import render_cloud
from .config import RunConfig
