"""
Oracle App - Wire Protocol

One JSON object per UTF-8, LF-terminated line.

    request:  {"id": <int>, "png_b64": <base64 PNG>}
    response: {"id": <int>, "label": <int>}

Over stdio responses come back in request order; over HTTP they are
correlated by id. Any extra response fields (e.g. a confidence) are
dropped.
"""

import base64
import binascii
import json

from core.exceptions import ProtocolError
from imaging.files import decode_png, encode_png


def encode_request(request_id, img):
    payload = base64.b64encode(encode_png(img)).decode('ascii')
    return json.dumps({'id': int(request_id), 'png_b64': payload}, separators=(',', ':')) + '\n'


def decode_request(line):
    """Parse a request line into (id, Image)."""
    message = _parse(line)
    request_id = _integer(message, 'id')
    payload = message.get('png_b64')
    if not isinstance(payload, str):
        raise ProtocolError('Request is missing "png_b64"')
    try:
        return request_id, decode_png(base64.b64decode(payload, validate=True))
    except (binascii.Error, ValueError) as e:
        raise ProtocolError(f'Request image could not be decoded: {e}')


def encode_response(request_id, label):
    return json.dumps({'id': int(request_id), 'label': int(label)}, separators=(',', ':')) + '\n'


def decode_response(line, expected_id=None):
    """Parse a response line and return its integer label."""
    message = _parse(line)
    response_id = _integer(message, 'id')
    if expected_id is not None and response_id != expected_id:
        raise ProtocolError(f'Response id {response_id} does not match request id {expected_id}')
    return _integer(message, 'label')


def _parse(line):
    if isinstance(line, bytes):
        try:
            line = line.decode('utf-8')
        except UnicodeDecodeError as e:
            raise ProtocolError(f'Message is not UTF-8: {e}')
    try:
        message = json.loads(line)
    except json.JSONDecodeError:
        raise ProtocolError(f'Malformed message: {line.strip()[:80]!r}')
    if not isinstance(message, dict):
        raise ProtocolError(f'Message must be a JSON object, got {line.strip()[:80]!r}')
    return message


def _integer(message, key):
    value = message.get(key)
    # bool is an int subclass; "true" is not a label
    if not isinstance(value, int) or isinstance(value, bool):
        raise ProtocolError(f'Field "{key}" must be an integer, got {value!r}')
    return value
