import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'seqfront_project.settings')
django.setup()
