# copyright ############################### #
# This file is part of the fmpscore Package. #
# Copyright (c) 2025.                        #
# ########################################## #

from .enrichment import (
    ContextMaps,
    EnrichmentTags,
    HostnameTags,
    PrefixTable,
    derive_hostname_tags,
    load_context_maps,
    parse_enrichment_record,
    write_context_maps,
)
from .store import (
    AlertStore,
    EnrichmentSummary,
    EntityAlert,
    IngestSummary,
    PrefixAlert,
    ip_to_int,
    prefix24,
)
