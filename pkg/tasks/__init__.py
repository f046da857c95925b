# Celery task modules
