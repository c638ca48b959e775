from django.apps import AppConfig
import logging

logger = logging.getLogger(__name__)


class FronthaulConfig(AppConfig):
    name = 'fronthaul'
    verbose_name = 'Sequential fronthaul simulator'

    def ready(self):
        """Check SEQFRONT_DEFAULTS once at start-up; commands report the same errors as usage errors."""
        try:
            from .services.network_config import describe_plan, plan_from_options, settings_defaults
            plan, _ = plan_from_options({}, defaults=settings_defaults())
            for line in describe_plan(plan):
                logger.debug(f"Default plan: {line}")
        except Exception as e:
            logger.warning(f"SEQFRONT_DEFAULTS is inconsistent: {e}")
