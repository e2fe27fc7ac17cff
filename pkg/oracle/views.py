"""
Oracle App - Views

HTTP face of the oracle stub: POST /classify speaking the line protocol.
"""

import logging

from django.http import JsonResponse
from django.utils.decorators import method_decorator
from django.views import View
from django.views.decorators.csrf import csrf_exempt

from core.exceptions import ProtocolError
from .protocol import decode_request
from .services import OracleService

logger = logging.getLogger('patch_attack')

_classifier = None


def _stub_classifier():
    global _classifier
    if _classifier is None:
        _classifier = OracleService.builtin()
    return _classifier


@method_decorator(csrf_exempt, name='dispatch')
class ClassifyView(View):
    """Answer one classification request."""

    http_method_names = ['post']

    def post(self, request):
        try:
            request_id, img = decode_request(request.body)
        except ProtocolError as e:
            logger.warning(f'Rejected oracle request: {e}')
            return JsonResponse({'error': str(e)}, status=400)
        label = OracleService.stub_label(img, _stub_classifier())
        return JsonResponse({'id': request_id, 'label': int(label)})
