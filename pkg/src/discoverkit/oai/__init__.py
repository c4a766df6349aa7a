"""OAI-PMH 2.0 client."""

from discoverkit.oai.client import (
    RecordStream,
    fetch,
    get_record,
    identify,
    list_metadata_formats,
    list_records,
    normalize_base_url,
)
from discoverkit.oai.protocol import (
    ERROR_CODES,
    VERBS,
    IdentifyInfo,
    InvalidRequest,
    MetadataFormat,
    OaiProtocolError,
    ParsedResponse,
    ResumptionToken,
    TokenLoop,
    TransportFault,
    VerbRequest,
    build_request,
    parse_response,
)
from discoverkit.oai.records import (
    DC_ELEMENTS,
    DublinCoreRecord,
    OaiEndpoint,
    RecordHeader,
    format_datestamp,
    parse_datestamp,
)
