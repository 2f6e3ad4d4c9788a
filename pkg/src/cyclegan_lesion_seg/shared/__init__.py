"""Shared configuration, data models and exceptions for the lesion segmentation toolkit."""
