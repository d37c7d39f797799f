from django.apps import AppConfig


class HybridBorrowingConfig(AppConfig):
    name = "hybrid_borrowing"
    verbose_name = "Hybrid RCT borrowing"
